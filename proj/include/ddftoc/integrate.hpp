#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "log.hpp"
#include "model.hpp"

namespace ddftoc {

struct IntegratorConfig
{
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;
  double max_step = std::numeric_limits<double>::infinity();

  void validate() const
  {
    if( !( rel_tol > 0 ) || !( abs_tol > 0 ) )
      throw InvalidParameter( "integrator tolerances must be positive" );
    if( !( max_step > 0 ) )
      throw InvalidParameter( "max_step must be positive" );
  }
};

/// M y' = F(y, t) with M = diag(1 on differential rows, 0 on algebraic rows).
struct DaeSystem
{
  using Rhs = std::function<VectorXd( const VectorXd&, double )>;
  using Jacobian = std::function<MatrixXd( const VectorXd&, double )>;

  int dof_count = 0;
  std::vector<int> algebraic_idx;
  Rhs rhs;
  Jacobian jacobian;           ///< optional; forward differences when empty
  Jacobian algebraic_jacobian; ///< optional rows of dF/dy for algebraic_idx only

  void validate() const
  {
    std::vector<bool> seen( dof_count, false );
    for( int i : algebraic_idx )
    {
      if( i < 0 || i >= dof_count || seen[i] )
        throw ShapeError( "algebraic index set must be distinct indices within the system" );
      seen[i] = true;
    }
    if( !rhs )
      throw InvalidParameter( "DAE system needs a right-hand side" );
  }
};

struct IntegratorStats
{
  long steps = 0;
  long rejected = 0;
  long rhs_evals = 0;
  long jacobian_evals = 0;
  long factorizations = 0;
};

/// Variable-order (1-5) BDF with quasi-constant step size, in the NDF-free form used by
/// standard stiff solvers. Newton iterations reuse the Jacobian and its LU factorization
/// until convergence degrades.
class BdfDae
{
public:
  BdfDae( DaeSystem system, IntegratorConfig cfg )
      : sys_( std::move( system ) )
      , cfg_( cfg )
  {
    sys_.validate();
    cfg_.validate();
    mass_ = VectorXd::Ones( sys_.dof_count );
    for( int i : sys_.algebraic_idx )
      mass_[i] = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    newton_tol_ = std::max( 10 * eps / cfg_.rel_tol, std::min( 0.03, std::sqrt( cfg_.rel_tol ) ) );
    for( int k = 0; k <= kMaxOrder; ++k )
    {
      gamma_[k] = 0.0;
      for( int j = 1; j <= k; ++j )
        gamma_[k] += 1.0 / j;
      alpha_[k] = ( 1.0 - kKappa[k] ) * gamma_[k];
      error_const_[k] = kKappa[k] * gamma_[k] + 1.0 / ( k + 1 );
    }
  }

  const IntegratorStats& stats() const { return stats_; }

  /// Integrate from out_times[0] and return one column per requested time (ascending).
  MatrixXd integrate( VectorXd y0, const VectorXd& out_times )
  {
    const int n = sys_.dof_count;
    require_size( y0.size(), n, "initial state" );
    if( out_times.size() < 1 )
      throw InvalidParameter( "need at least one output time" );
    for( Eigen::Index k = 1; k < out_times.size(); ++k )
      if( !( out_times[k] > out_times[k - 1] ) )
        throw InvalidParameter( "output times must be strictly increasing" );

    MatrixXd out( n, out_times.size() );
    double t = out_times[0];
    const double t_end = out_times[out_times.size() - 1];

    y0 = make_consistent( std::move( y0 ), t );
    out.col( 0 ) = y0;
    if( out_times.size() == 1 )
      return out;

    VectorXd yp = initial_derivative( y0, t );
    h_abs_ = initial_step( y0, yp, t, t_end );
    order_ = 1;
    n_equal_steps_ = 0;
    d_ = MatrixXd::Zero( n, kMaxOrder + 3 );
    d_.col( 0 ) = y0;
    d_.col( 1 ) = yp * h_abs_;
    set_jacobian( jacobian( y0, t ) );
    lu_.reset();

    Eigen::Index next = 1;
    y_ = y0;
    while( next < out_times.size() )
    {
      const double t_old = t;
      step( t, t_end );
      // Dense output through the interpolating polynomial of the accepted step.
      while( next < out_times.size() && out_times[next] <= t )
      {
        const double tq = out_times[next];
        VectorXd yq = ( tq == t ) ? y_ : dense_value( tq, t, last_h_, last_order_ );
        if( tq != t && tq > t_old )
          yq = project_algebraic( std::move( yq ), tq );
        out.col( next ) = yq;
        ++next;
      }
    }
    return out;
  }

private:
  static constexpr int kMaxOrder = 5;
  static constexpr int kNewtonMaxIter = 4;
  static constexpr double kMinFactor = 0.2;
  static constexpr double kMaxFactor = 10.0;
  static constexpr double kLuReuse = 0.2;
  static constexpr double kNewtonNoise = 1e-3;
  static constexpr std::array<double, 6> kKappa{ 0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0 };

  double rms( const VectorXd& v ) const { return v.norm() / std::sqrt( double( v.size() ) ); }

  VectorXd rhs( const VectorXd& y, double t )
  {
    ++stats_.rhs_evals;
    return sys_.rhs( y, t );
  }

  MatrixXd jacobian( const VectorXd& y, double t )
  {
    ++stats_.jacobian_evals;
    if( sys_.jacobian )
      return sys_.jacobian( y, t );
    const int n = sys_.dof_count;
    const VectorXd f0 = rhs( y, t );
    MatrixXd jac( n, n );
    const double root_eps = std::sqrt( std::numeric_limits<double>::epsilon() );
    VectorXd yy = y;
    for( int j = 0; j < n; ++j )
    {
      const double delta = root_eps * std::max( 1.0, std::abs( y[j] ) );
      yy[j] = y[j] + delta;
      jac.col( j ) = ( rhs( yy, t ) - f0 ) / delta;
      yy[j] = y[j];
    }
    return jac;
  }

  MatrixXd algebraic_rows( const VectorXd& y, double t )
  {
    if( sys_.algebraic_jacobian )
      return sys_.algebraic_jacobian( y, t );
    const MatrixXd full = jacobian( y, t );
    MatrixXd rows( sys_.algebraic_idx.size(), sys_.dof_count );
    for( std::size_t a = 0; a < sys_.algebraic_idx.size(); ++a )
      rows.row( a ) = full.row( sys_.algebraic_idx[a] );
    return rows;
  }

  VectorXd algebraic_residual( const VectorXd& f ) const
  {
    VectorXd g( sys_.algebraic_idx.size() );
    for( std::size_t a = 0; a < sys_.algebraic_idx.size(); ++a )
      g[a] = f[sys_.algebraic_idx[a]];
    return g;
  }

  /// Newton on the algebraic rows, moving only algebraic unknowns.
  VectorXd solve_algebraic( VectorXd y, double t, int max_iter )
  {
    const auto& alg = sys_.algebraic_idx;
    if( alg.empty() )
      return y;
    for( int it = 0; it < max_iter; ++it )
    {
      const VectorXd g = algebraic_residual( rhs( y, t ) );
      const MatrixXd rows = algebraic_rows( y, t );
      MatrixXd jaa( alg.size(), alg.size() );
      for( std::size_t b = 0; b < alg.size(); ++b )
        jaa.col( b ) = rows.col( alg[b] );
      const VectorXd delta = jaa.partialPivLu().solve( g );
      double change = 0.0;
      for( std::size_t a = 0; a < alg.size(); ++a )
      {
        y[alg[a]] -= delta[a];
        change = std::max( change, std::abs( delta[a] ) / ( cfg_.abs_tol + cfg_.rel_tol * std::abs( y[alg[a]] ) ) );
      }
      if( change < 1e-6 )
        break;
    }
    return y;
  }

  VectorXd make_consistent( VectorXd y0, double t )
  {
    if( sys_.algebraic_idx.empty() )
      return y0;
    const VectorXd g0 = algebraic_residual( rhs( y0, t ) );
    const double worst = g0.cwiseAbs().maxCoeff();
    if( worst <= cfg_.abs_tol )
      return y0;
    VectorXd y = solve_algebraic( y0, t, 20 );
    static std::atomic<int> reported{ 0 };
    log::warn_limited( reported, "initial data violates the boundary constraints (max residual " + std::to_string( worst )
               + "); projected algebraic rows, max change " + std::to_string( ( y - y0 ).cwiseAbs().maxCoeff() ) );
    return y;
  }

  VectorXd project_algebraic( VectorXd y, double t ) { return solve_algebraic( std::move( y ), t, 3 ); }

  /// y'(t0): differential rows from F, algebraic rows from differentiating the constraints.
  VectorXd initial_derivative( const VectorXd& y, double t )
  {
    VectorXd f = rhs( y, t );
    VectorXd yp = f;
    const auto& alg = sys_.algebraic_idx;
    if( alg.empty() )
      return yp;
    for( int i : alg )
      yp[i] = 0.0;
    const double dt = std::sqrt( std::numeric_limits<double>::epsilon() ) * std::max( 1.0, std::abs( t ) );
    const VectorXd g_t = ( algebraic_residual( rhs( y, t + dt ) ) - algebraic_residual( f ) ) / dt;
    const MatrixXd rows = algebraic_rows( y, t );
    MatrixXd jaa( alg.size(), alg.size() );
    for( std::size_t b = 0; b < alg.size(); ++b )
      jaa.col( b ) = rows.col( alg[b] );
    const VectorXd rhs_a = -( rows * yp + g_t );
    const VectorXd ypa = jaa.partialPivLu().solve( rhs_a );
    for( std::size_t a = 0; a < alg.size(); ++a )
      yp[alg[a]] = ypa[a];
    return yp;
  }

  double initial_step( const VectorXd& y0, const VectorXd& yp, double t0, double t_end )
  {
    const double span = t_end - t0;
    const VectorXd scale = ( cfg_.abs_tol + cfg_.rel_tol * y0.array().abs() ).matrix();
    const double d0 = rms( y0.cwiseQuotient( scale ) );
    const double d1 = rms( yp.cwiseQuotient( scale ) );
    double h0 = ( d0 < 1e-5 || d1 < 1e-5 ) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min( h0, span );
    const VectorXd y1 = y0 + h0 * yp;
    VectorXd diff = ( rhs( y1, t0 + h0 ) - yp ) / h0;
    for( int i : sys_.algebraic_idx )
      diff[i] = 0.0;
    const double d2 = rms( diff.cwiseQuotient( scale ) );
    double h1;
    if( d1 <= 1e-15 && d2 <= 1e-15 )
      h1 = std::max( 1e-6, h0 * 1e-3 );
    else
      h1 = std::sqrt( 0.01 / std::max( d1, d2 ) );
    return std::min( { 100 * h0, h1, span, cfg_.max_step } );
  }

  /// Rescale the difference array for a step-size change by `factor`.
  void change_d( int order, double factor )
  {
    const MatrixXd r = compute_r( order, factor );
    const MatrixXd u = compute_r( order, 1.0 );
    const MatrixXd ru = r * u;
    MatrixXd block = d_.leftCols( order + 1 );
    d_.leftCols( order + 1 ) = block * ru;
  }

  static MatrixXd compute_r( int order, double factor )
  {
    MatrixXd m = MatrixXd::Zero( order + 1, order + 1 );
    m.row( 0 ).setOnes();
    for( int i = 1; i <= order; ++i )
      for( int j = 1; j <= order; ++j )
        m( i, j ) = ( i - 1 - factor * j ) / i;
    for( int i = 1; i <= order; ++i )
      m.row( i ) = m.row( i ).cwiseProduct( m.row( i - 1 ) );
    return m;
  }

  VectorXd dense_value( double tq, double t, double h, int order ) const
  {
    VectorXd y = d_.col( 0 );
    double p = 1.0;
    for( int j = 0; j < order; ++j )
    {
      p *= ( tq - ( t - h * j ) ) / ( h * ( 1 + j ) );
      y += p * dense_d_.col( j + 1 );
    }
    return y;
  }

  // Algebraic rows are eliminated once per Jacobian; the iteration matrix only covers the
  // differential unknowns.
  void set_jacobian( const MatrixXd& jac )
  {
    const auto& alg = sys_.algebraic_idx;
    if( alg.empty() )
    {
      reduced_ = jac;
      return;
    }
    if( diff_idx_.empty() )
    {
      for( int i = 0; i < sys_.dof_count; ++i )
        if( mass_[i] != 0.0 )
          diff_idx_.push_back( i );
    }
    jaa_lu_.emplace( jac( alg, alg ) );
    g_ = jaa_lu_->solve( jac( alg, diff_idx_ ) );
    jda_ = jac( diff_idx_, alg );
    reduced_ = jac( diff_idx_, diff_idx_ ) - jda_ * g_;
  }

  void factorize( double c )
  {
    MatrixXd a = -c * reduced_;
    a.diagonal().array() += 1.0;
    lu_.emplace( a );
    c_lu_ = c;
    ++stats_.factorizations;
  }

  /// Newton step: differential rows of M - c J from the reduced LU, algebraic rows exact.
  VectorXd newton_direction( const VectorXd& f, const VectorXd& b ) const
  {
    const auto& alg = sys_.algebraic_idx;
    if( alg.empty() )
      return lu_->solve( b );
    const VectorXd z = jaa_lu_->solve( f( alg ) );
    const VectorXd bd = b( diff_idx_ ) - c_lu_ * ( jda_ * z );
    const VectorXd dd = lu_->solve( bd );
    const VectorXd da = -z - g_ * dd;
    VectorXd dy( sys_.dof_count );
    dy( diff_idx_ ) = dd;
    dy( alg ) = da;
    return dy;
  }

  struct NewtonResult
  {
    bool converged = false;
    int iterations = 0;
    VectorXd y, d;
  };

  NewtonResult solve_bdf_system( double t_new, const VectorXd& y_predict, double c, const VectorXd& psi,
                                 const VectorXd& scale )
  {
    NewtonResult res;
    res.y = y_predict;
    res.d = VectorXd::Zero( y_predict.size() );
    std::optional<double> dy_norm_old;
    for( int k = 0; k < kNewtonMaxIter; ++k )
    {
      res.iterations = k + 1;
      VectorXd f;
      try
      {
        f = rhs( res.y, t_new );
      }
      catch( const NumericalBlowup& )
      {
        break;
      }
      if( !f.allFinite() )
        break;
      VectorXd b = c * f - mass_.cwiseProduct( psi + res.d );
      const VectorXd dy = newton_direction( f, b );
      const double dy_norm = rms( dy.cwiseQuotient( scale ) );
      // updates at round-off level carry no rate information
      if( dy_norm < kNewtonNoise * newton_tol_ )
      {
        res.y += dy;
        res.d += dy;
        res.converged = true;
        break;
      }
      std::optional<double> rate;
      if( dy_norm_old )
        rate = dy_norm / *dy_norm_old;
      if( rate && ( *rate >= 1 || std::pow( *rate, kNewtonMaxIter - k ) / ( 1 - *rate ) * dy_norm > newton_tol_ ) )
        break;
      res.y += dy;
      res.d += dy;
      if( dy_norm == 0 || ( rate && *rate / ( 1 - *rate ) * dy_norm < newton_tol_ ) )
      {
        res.converged = true;
        break;
      }
      dy_norm_old = dy_norm;
    }
    return res;
  }

  void step( double& t, double t_bound )
  {
    const double min_step_base = 10 * std::abs( std::nextafter( t, std::numeric_limits<double>::infinity() ) - t );
    double h_abs = h_abs_;
    if( h_abs > cfg_.max_step )
    {
      change_d( order_, cfg_.max_step / h_abs );
      h_abs = cfg_.max_step;
      n_equal_steps_ = 0;
    }
    else if( h_abs < min_step_base )
    {
      change_d( order_, min_step_base / h_abs );
      h_abs = min_step_base;
      n_equal_steps_ = 0;
    }
    bool current_jac = false;
    const int order = order_;
    double t_new = t;
    NewtonResult nr;
    double error_norm = 0.0, safety = 0.9;
    VectorXd scale;
    for( ;; )
    {
      if( h_abs < min_step_base )
        throw DivergedSolve( "integrator step size underflow", t );
      t_new = t + h_abs;
      if( t_new > t_bound )
      {
        t_new = t_bound;
        change_d( order, std::abs( t_new - t ) / h_abs );
        n_equal_steps_ = 0;
      }
      const double h = t_new - t;
      h_abs = h;

      const VectorXd y_predict = d_.leftCols( order + 1 ).rowwise().sum();
      scale = ( cfg_.abs_tol + cfg_.rel_tol * y_predict.array().abs() ).matrix();
      VectorXd psi = VectorXd::Zero( y_predict.size() );
      for( int j = 1; j <= order; ++j )
        psi += gamma_[j] * d_.col( j );
      psi /= alpha_[order];
      const double c = h / alpha_[order];

      bool converged = false;
      for( ;; )
      {
        if( !lu_ || std::abs( c / c_lu_ - 1.0 ) > kLuReuse )
          factorize( c );
        nr = solve_bdf_system( t_new, y_predict, c, psi, scale );
        converged = nr.converged;
        if( converged || current_jac )
          break;
        try
        {
          set_jacobian( jacobian( y_predict, t_new ) );
        }
        catch( const NumericalBlowup& )
        {
          break;
        }
        lu_.reset();
        current_jac = true;
      }

      if( !converged )
      {
        h_abs *= 0.5;
        change_d( order, 0.5 );
        n_equal_steps_ = 0;
        lu_.reset();
        ++stats_.rejected;
        continue;
      }

      safety = 0.9 * ( 2 * kNewtonMaxIter + 1 ) / ( 2 * kNewtonMaxIter + nr.iterations );
      scale = ( cfg_.abs_tol + cfg_.rel_tol * nr.y.array().abs() ).matrix();
      error_norm = rms( ( error_const_[order] * nr.d ).cwiseQuotient( scale ) );
      if( error_norm > 1 )
      {
        const double factor = std::max( kMinFactor, safety * std::pow( error_norm, -1.0 / ( order + 1 ) ) );
        h_abs *= factor;
        change_d( order, factor );
        n_equal_steps_ = 0;
        ++stats_.rejected;
        continue;
      }
      break;
    }

    if( !nr.y.allFinite() )
      throw DivergedSolve( "non-finite state in accepted step", t_new );

    ++stats_.steps;
    ++n_equal_steps_;
    t = t_new;
    y_ = nr.y;
    h_abs_ = h_abs;

    d_.col( order + 2 ) = nr.d - d_.col( order + 1 );
    d_.col( order + 1 ) = nr.d;
    for( int i = order; i >= 0; --i )
      d_.col( i ) += d_.col( i + 1 );

    dense_d_ = d_.leftCols( order + 1 );
    last_h_ = h_abs;
    last_order_ = order;

    if( n_equal_steps_ < order + 1 )
      return;

    const double inf = std::numeric_limits<double>::infinity();
    const double error_m_norm
        = order > 1 ? rms( ( error_const_[order - 1] * d_.col( order ) ).cwiseQuotient( scale ) ) : inf;
    const double error_p_norm
        = order < kMaxOrder ? rms( ( error_const_[order + 1] * d_.col( order + 2 ) ).cwiseQuotient( scale ) ) : inf;
    const std::array<double, 3> norms{ error_m_norm, error_norm, error_p_norm };
    std::array<double, 3> factors{};
    for( int i = 0; i < 3; ++i )
      factors[i] = norms[i] == 0 ? inf : std::pow( norms[i], -1.0 / ( order + i ) );
    const int best = static_cast<int>( std::max_element( factors.begin(), factors.end() ) - factors.begin() );
    order_ = order + best - 1;
    const double factor = std::min( kMaxFactor, safety * factors[best] );
    h_abs_ *= factor;
    change_d( order_, factor );
    n_equal_steps_ = 0;
  }

  DaeSystem sys_;
  IntegratorConfig cfg_;
  VectorXd mass_;
  double newton_tol_ = 1e-4;
  std::array<double, kMaxOrder + 1> gamma_{}, alpha_{}, error_const_{};

  MatrixXd d_, dense_d_;
  VectorXd y_;
  std::vector<int> diff_idx_;
  MatrixXd reduced_, g_, jda_;
  std::optional<Eigen::PartialPivLU<MatrixXd>> jaa_lu_;
  std::optional<Eigen::PartialPivLU<MatrixXd>> lu_;
  double h_abs_ = 0.0, last_h_ = 0.0, c_lu_ = 0.0;
  int order_ = 1, last_order_ = 1;
  int n_equal_steps_ = 0;
  IntegratorStats stats_;
};

/// Barycentric interpolation of a space-time field across its time columns.
class TimeInterpolant
{
public:
  TimeInterpolant( const TimeGrid& tg, MatrixXd values )
      : tg_( &tg )
      , values_( std::move( values ) )
  {
    require_size( values_.cols(), tg.size(), "time interpolant" );
  }

  VectorXd operator()( double t ) const { return values_ * tg_->interpolation_row( t ); }

private:
  const TimeGrid* tg_;
  MatrixXd values_;
};

inline VectorXd evaluate_trajectory( const SpaceTimeField& field, const TimeGrid& tg, double t )
{
  require_size( field.cols(), tg.size(), "trajectory" );
  return field.values * tg.interpolation_row( t );
}

namespace detail {

inline void check_control( const ControlProblem& prob, const SpaceTimeField& W )
{
  if( W.rows() != prob.control_size() || W.cols() != prob.timegrid().size() )
    throw ShapeError( "control field has shape " + std::to_string( W.rows() ) + "x" + std::to_string( W.cols() )
                      + ", expected " + std::to_string( prob.control_size() ) + "x"
                      + std::to_string( prob.timegrid().size() ) );
}

inline void overwrite_boundary_rows( const SpectralGrid& g, VectorXd& interior, const VectorXd& boundary )
{
  const auto& bidx = g.boundary_idx();
  for( std::size_t b = 0; b < bidx.size(); ++b )
    interior[bidx[b]] = boundary[b];
}

inline void overwrite_boundary_rows( const SpectralGrid& g, MatrixXd& interior, const MatrixXd& boundary )
{
  const auto& bidx = g.boundary_idx();
  for( std::size_t b = 0; b < bidx.size(); ++b )
    interior.row( bidx[b] ) = boundary.row( b );
}

} // namespace detail

inline DaeSystem state_system( const ControlProblem& prob, const SpaceTimeField& W )
{
  detail::check_control( prob, W );
  const SpectralGrid& g = prob.grid();
  auto control = std::make_shared<TimeInterpolant>( prob.timegrid(), W.values );
  DaeSystem sys;
  sys.dof_count = g.size();
  sys.algebraic_idx = g.boundary_idx();
  sys.rhs = [&prob, control]( const VectorXd& rho, double t ) {
    return state_dae_rhs( prob, rho, ( *control )( t ), t );
  };
  sys.jacobian = [&prob, &g, control]( const VectorXd& rho, double t ) {
    const VectorXd w = ( *control )( t );
    MatrixXd jac = state_jacobian( prob, rho, w, t );
    detail::overwrite_boundary_rows( g, jac, state_boundary_jacobian( prob, rho, w, t ) );
    return jac;
  };
  sys.algebraic_jacobian = [&prob, control]( const VectorXd& rho, double t ) {
    return state_boundary_jacobian( prob, rho, ( *control )( t ), t );
  };
  return sys;
}

/// Adjoint in reversed time tau = T - t; P and W are interpolated at t = T - tau.
inline DaeSystem adjoint_system( const ControlProblem& prob, const SpaceTimeField& P, const SpaceTimeField& W )
{
  detail::check_control( prob, W );
  const SpectralGrid& g = prob.grid();
  if( P.rows() != g.size() || P.cols() != prob.timegrid().size() )
    throw ShapeError( "state field does not conform to the grids" );
  const double horizon = prob.timegrid().horizon();
  auto control = std::make_shared<TimeInterpolant>( prob.timegrid(), W.values );
  auto state = std::make_shared<TimeInterpolant>( prob.timegrid(), P.values );
  auto boundary_rows = std::make_shared<MatrixXd>( adjoint_boundary_jacobian( prob ) );
  // convolution is linear in rho, so interpolating it node-wise is exact
  MatrixXd conv_nodes = MatrixXd::Zero( g.dim() * g.size(), P.cols() );
  if( prob.kappa() != 0.0 )
    for( Eigen::Index k = 0; k < P.cols(); ++k )
      conv_nodes.col( k ) = prob.interaction().convolve( P.col( k ) );
  auto conv = std::make_shared<TimeInterpolant>( prob.timegrid(), std::move( conv_nodes ) );
  DaeSystem sys;
  sys.dof_count = g.size();
  sys.algebraic_idx = g.boundary_idx();
  sys.rhs = [&prob, &g, control, state, conv, horizon]( const VectorXd& q, double tau ) {
    const double t = std::clamp( horizon - tau, 0.0, horizon );
    VectorXd f = adjoint_rhs( prob, q, ( *state )( t ), ( *conv )( t ), ( *control )( t ), t );
    detail::overwrite_boundary_rows( g, f, adjoint_boundary_residual( prob, q ) );
    return f;
  };
  sys.jacobian = [&prob, &g, control, state, conv, boundary_rows, horizon]( const VectorXd&, double tau ) {
    const double t = std::clamp( horizon - tau, 0.0, horizon );
    MatrixXd jac = adjoint_jacobian( prob, ( *state )( t ), ( *conv )( t ), ( *control )( t ), t );
    detail::overwrite_boundary_rows( g, jac, *boundary_rows );
    return jac;
  };
  sys.algebraic_jacobian = [boundary_rows]( const VectorXd&, double ) { return *boundary_rows; };
  return sys;
}

inline SpaceTimeField solve_state( const ControlProblem& prob, const SpaceTimeField& W, const IntegratorConfig& cfg,
                                   IntegratorStats* stats = nullptr )
{
  BdfDae solver( state_system( prob, W ), cfg );
  SpaceTimeField P( solver.integrate( prob.rho0(), prob.timegrid().times() ), 1 );
  // the integrator starts from the projected data; the stored initial column is the prescribed one
  P.col( 0 ) = prob.rho0();
  if( stats )
    *stats = solver.stats();
  return P;
}

inline SpaceTimeField solve_adjoint( const ControlProblem& prob, const SpaceTimeField& P, const SpaceTimeField& W,
                                     const IntegratorConfig& cfg, IntegratorStats* stats = nullptr )
{
  const TimeGrid& tg = prob.timegrid();
  const int nt = tg.size();
  const double horizon = tg.horizon();
  VectorXd taus( nt );
  for( int k = 0; k < nt; ++k )
    taus[k] = horizon - tg.times()[nt - 1 - k];
  taus[0] = 0.0;
  BdfDae solver( adjoint_system( prob, P, W ), cfg );
  const MatrixXd rev = solver.integrate( VectorXd::Zero( prob.grid().size() ), taus );
  SpaceTimeField Q( prob.grid().size(), nt, 1 );
  for( int k = 0; k < nt; ++k )
    Q.col( k ) = rev.col( nt - 1 - k );
  Q.col( nt - 1 ).setZero();
  if( stats )
    *stats = solver.stats();
  return Q;
}

} // namespace ddftoc
