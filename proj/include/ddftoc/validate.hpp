#pragma once

#include <random>

#include "optimize.hpp"

// Independent oracles for the test suites.

namespace ddftoc {

/// Trapezoid (product trapezoid in 2D) evaluation of int rho(r') K(r, r') dr' over the box.
inline VectorXd brute_convolution( const Kernel& kernel, const SpatialFunction& rho, const Point& r,
                                   const std::vector<Interval1D>& box, int resolution )
{
  if( resolution < 1000 )
    throw InvalidResolution( "brute-force convolution needs resolution >= 1000" );
  const int dim = static_cast<int>( box.size() );
  if( dim != kernel.dim || dim < 1 || dim > 2 )
    throw ShapeError( "box dimension does not match the kernel" );
  std::vector<VectorXd> xs, ws;
  for( const auto& iv : box )
  {
    VectorXd x = VectorXd::LinSpaced( resolution + 1, iv.a, iv.b );
    VectorXd w = VectorXd::Constant( resolution + 1, iv.length() / resolution );
    w[0] *= 0.5;
    w[resolution] *= 0.5;
    xs.push_back( std::move( x ) );
    ws.push_back( std::move( w ) );
  }
  VectorXd out = VectorXd::Zero( dim );
  const int m2 = dim == 2 ? resolution + 1 : 1;
  for( int j = 0; j < m2; ++j )
  {
    VectorXd line = VectorXd::Zero( dim );
    for( int i = 0; i <= resolution; ++i )
    {
      const Point rp{ xs[0][i], dim == 2 ? xs[1][j] : 0.0 };
      const double v = rho( rp );
      if( v == 0.0 )
        continue;
      const Point k = kernel.evaluator( r, rp );
      for( int d = 0; d < dim; ++d )
        line[d] += ws[0][i] * v * k[d];
    }
    out += ( dim == 2 ? ws[1][j] : 1.0 ) * line;
  }
  return out;
}

inline VectorXd brute_convolution( const Kernel& kernel, const SpatialFunction& rho, const Point& r,
                                   const SpectralGrid& grid, int resolution )
{
  std::vector<Interval1D> box;
  for( int d = 0; d < grid.dim(); ++d )
    box.push_back( grid.axis( d ).interval() );
  return brute_convolution( kernel, rho, r, box, resolution );
}

/// Value with first and pure second derivatives along (t, x1, x2), propagated exactly through
/// arithmetic and the elementary functions. Enough for time derivatives and Laplacians.
struct Jet
{
  double v = 0.0;
  std::array<double, 3> d{}, dd{};

  Jet() = default;
  Jet( double value )
      : v( value )
  {}

  static Jet variable( double value, int axis )
  {
    Jet j( value );
    j.d[axis] = 1.0;
    return j;
  }

  // chain rule for g(u) with g', g''
  Jet apply( double g, double g1, double g2 ) const
  {
    Jet r( g );
    for( int i = 0; i < 3; ++i )
    {
      r.d[i] = g1 * d[i];
      r.dd[i] = g2 * d[i] * d[i] + g1 * dd[i];
    }
    return r;
  }
};

inline Jet operator+( const Jet& a, const Jet& b )
{
  Jet r( a.v + b.v );
  for( int i = 0; i < 3; ++i )
  {
    r.d[i] = a.d[i] + b.d[i];
    r.dd[i] = a.dd[i] + b.dd[i];
  }
  return r;
}
inline Jet operator-( const Jet& a ) { return a.apply( -a.v, -1.0, 0.0 ); }
inline Jet operator-( const Jet& a, const Jet& b ) { return a + ( -b ); }
inline Jet operator*( const Jet& a, const Jet& b )
{
  Jet r( a.v * b.v );
  for( int i = 0; i < 3; ++i )
  {
    r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    r.dd[i] = a.dd[i] * b.v + 2 * a.d[i] * b.d[i] + a.v * b.dd[i];
  }
  return r;
}
inline Jet operator/( const Jet& a, const Jet& b ) { return a * b.apply( 1.0 / b.v, -1.0 / ( b.v * b.v ), 2.0 / ( b.v * b.v * b.v ) ); }
inline Jet sin( const Jet& a ) { return a.apply( std::sin( a.v ), std::cos( a.v ), -std::sin( a.v ) ); }
inline Jet cos( const Jet& a ) { return a.apply( std::cos( a.v ), -std::sin( a.v ), -std::cos( a.v ) ); }
inline Jet exp( const Jet& a )
{
  const double e = std::exp( a.v );
  return a.apply( e, e, e );
}

using JetField = std::function<Jet( const Jet& x1, const Jet& x2, const Jet& t )>;

struct ManufacturedSpec
{
  JetField rho_exact;
  JetField q_exact;
  JetField vext; ///< empty means V_ext = 0
  ControlKind kind = ControlKind::Flow;
  BoundaryKind bc = BoundaryKind::no_flux();
  double beta = 1.0;
};

/// kappa = 0 optimality system with a known solution: f and rho_hat are chosen so that
/// (rho_exact, q_exact, w_exact) satisfy state, adjoint and gradient equations.
struct ManufacturedProblem
{
  SpaceTimeFunction rho_exact, q_exact, f, rho_hat;
  std::function<Point( const Point&, double )> w_exact; ///< flow components (source uses entry 0)
  SpatialFunction rho0;
  ManufacturedSpec spec;
  std::shared_ptr<const SpectralGrid> grid;
  TimeGrid timegrid{ 1.0, 1 };

  ControlProblem problem() const
  {
    ProblemData d;
    d.grid = grid;
    d.timegrid = timegrid;
    d.kind = spec.kind;
    d.bc = spec.bc;
    d.kappa = 0.0;
    d.beta = spec.beta;
    if( spec.vext )
    {
      const JetField v = spec.vext;
      d.vext = [v]( const Point& p ) { return v( p[0], p[1], 0.0 ).v; };
    }
    d.rho_hat = rho_hat;
    d.source = f;
    d.rho0 = rho0;
    return ControlProblem( std::move( d ) );
  }

  SpaceTimeField exact_state() const { return sample_field( rho_exact ); }
  SpaceTimeField exact_adjoint() const { return sample_field( q_exact ); }

  SpaceTimeField exact_control() const
  {
    const int n = grid->size();
    const int comps = spec.kind == ControlKind::Flow ? grid->dim() : 1;
    SpaceTimeField W( comps * n, timegrid.size(), comps );
    for( int k = 0; k < timegrid.size(); ++k )
      for( int i = 0; i < n; ++i )
      {
        const Point w = w_exact( grid->node( i ), timegrid.times()[k] );
        for( int c = 0; c < comps; ++c )
          W.values( c * n + i, k ) = w[c];
      }
    return W;
  }

private:
  SpaceTimeField sample_field( const SpaceTimeFunction& fn ) const
  {
    SpaceTimeField F( grid->size(), timegrid.size(), 1 );
    for( int k = 0; k < timegrid.size(); ++k )
      F.col( k ) = sample( *grid, fn, timegrid.times()[k] );
    return F;
  }
};

namespace detail {

struct JetPoint
{
  Jet rho, q, v;
};

inline JetPoint eval_jets( const ManufacturedSpec& s, const Point& p, double t )
{
  const Jet x1 = Jet::variable( p[0], 1 ), x2 = Jet::variable( p[1], 2 ), tt = Jet::variable( t, 0 );
  return { s.rho_exact( x1, x2, tt ), s.q_exact( x1, x2, tt ), s.vext ? s.vext( x1, x2, tt ) : Jet( 0.0 ) };
}

} // namespace detail

inline ManufacturedProblem make_manufactured( std::shared_ptr<const SpectralGrid> grid, const TimeGrid& tg,
                                              ManufacturedSpec spec )
{
  if( !grid )
    throw InvalidParameter( "manufactured problem needs a grid" );
  if( !spec.rho_exact || !spec.q_exact )
    throw InvalidManufactured( "manufactured problem needs rho_exact and q_exact" );
  if( !( spec.beta > 0 ) )
    throw InvalidParameter( "beta must be positive" );
  const double T = tg.horizon();
  const int dim = grid->dim();

  for( int i = 0; i < grid->size(); ++i )
  {
    const auto j = detail::eval_jets( spec, grid->node( i ), T );
    if( std::abs( j.q.v ) > 1e-12 )
      throw InvalidManufactured( "q_exact must vanish at the final time" );
  }

  const ManufacturedSpec s = spec;
  ManufacturedProblem mp;
  mp.spec = spec;
  mp.grid = grid;
  mp.timegrid = tg;
  mp.rho_exact = [s]( const Point& p, double t ) { return detail::eval_jets( s, p, t ).rho.v; };
  mp.q_exact = [s]( const Point& p, double t ) { return detail::eval_jets( s, p, t ).q.v; };
  mp.rho0 = [s]( const Point& p ) { return detail::eval_jets( s, p, 0.0 ).rho.v; };
  mp.w_exact = [s, dim]( const Point& p, double t ) {
    const auto j = detail::eval_jets( s, p, t );
    if( s.kind == ControlKind::Source )
      return Point{ -j.q.v / s.beta, 0.0 };
    Point w{ 0.0, 0.0 };
    for( int d = 0; d < dim; ++d )
      w[d] = -j.rho.v * j.q.d[d + 1] / s.beta;
    return w;
  };
  // rho_t = lap rho + div(rho a) [+ w] + f with a = grad V - w (flow) or grad V (source)
  mp.f = [s, dim]( const Point& p, double t ) {
    const auto j = detail::eval_jets( s, p, t );
    const Jet &r = j.rho, &q = j.q, &v = j.v;
    double out = r.d[0];
    for( int d = 1; d <= dim; ++d )
    {
      out -= r.dd[d];
      out -= r.d[d] * v.d[d] + r.v * v.dd[d];
      if( s.kind == ControlKind::Flow )
        out -= ( 2 * r.v * r.d[d] * q.d[d] + r.v * r.v * q.dd[d] ) / s.beta;
    }
    if( s.kind == ControlKind::Source )
      out += q.v / s.beta;
    return out;
  };
  // -q_t = lap q + b . grad q + rho - rho_hat with b = w - grad V (flow) or -grad V (source)
  mp.rho_hat = [s, dim]( const Point& p, double t ) {
    const auto j = detail::eval_jets( s, p, t );
    const Jet &r = j.rho, &q = j.q, &v = j.v;
    double out = r.v + q.d[0];
    for( int d = 1; d <= dim; ++d )
    {
      double b = -v.d[d];
      if( s.kind == ControlKind::Flow )
        b -= r.v * q.d[d] / s.beta;
      out += q.dd[d] + b * q.d[d];
    }
    return out;
  };

  // boundary compatibility of the exact fields, checked on the analytic derivatives
  const auto& bidx = grid->boundary_idx();
  for( int k = 0; k < tg.size(); ++k )
    for( std::size_t b = 0; b < bidx.size(); ++b )
    {
      const double t = tg.times()[k];
      const Point p = grid->node( bidx[b] );
      const auto j = detail::eval_jets( s, p, t );
      double state_res = j.rho.v - s.bc.c, adj_res = j.q.v;
      if( !s.bc.is_dirichlet() )
      {
        const Point w = mp.w_exact( p, t );
        state_res = adj_res = 0.0;
        for( int d = 0; d < dim; ++d )
        {
          const double nd = grid->normals()[b][d];
          const double wd = s.kind == ControlKind::Flow ? w[d] : 0.0;
          state_res += nd * ( j.rho.d[d + 1] + j.rho.v * ( j.v.d[d + 1] - wd ) );
          adj_res += nd * j.q.d[d + 1];
        }
      }
      if( std::abs( state_res ) > 1e-10 || std::abs( adj_res ) > 1e-10 )
        throw InvalidManufactured( "exact fields violate the boundary conditions at t=" + std::to_string( t ) );
    }
  return mp;
}

/// Central-difference directional derivatives of J against the adjoint gradient.
struct GradientCheck
{
  double adjoint = 0.0;                            ///< <beta W + rho grad Q, V> or <beta W + Q, V>
  std::vector<std::pair<double, double>> fd;       ///< (h, difference quotient)
  double best_abs = 0.0;
  double best_rel = 0.0;
  double best_h = 0.0;
};

inline GradientCheck fd_gradient_check( const ControlProblem& prob, const SpaceTimeField& W,
                                        const SpaceTimeField& V, const IntegratorConfig& icfg,
                                        const std::vector<double>& hs = { 1e-3, 1e-4, 1e-5 } )
{
  detail::check_control( prob, W );
  detail::check_control( prob, V );
  if( hs.empty() )
    throw InvalidParameter( "need at least one step size" );
  const SpaceTimeField P = solve_state( prob, W, icfg );
  const SpaceTimeField Q = solve_adjoint( prob, P, W, icfg );
  const SpaceTimeField Wg = gradient_update( prob, P, Q );
  // beta W + rho grad q = beta (W - Wg)
  const MatrixXd grad = prob.beta() * ( W.values - Wg.values );

  GradientCheck out;
  out.adjoint = space_time_inner( prob.grid(), prob.timegrid(), grad, V.values );
  out.best_abs = out.best_rel = std::numeric_limits<double>::infinity();
  for( double h : hs )
  {
    double quotient = 0.0;
    if( !V.values.isZero( 0.0 ) )
    {
      SpaceTimeField Wp = W, Wm = W;
      Wp.values += h * V.values;
      Wm.values -= h * V.values;
      const double jp = cost( prob, solve_state( prob, Wp, icfg ), Wp );
      const double jm = cost( prob, solve_state( prob, Wm, icfg ), Wm );
      quotient = ( jp - jm ) / ( 2 * h );
    }
    out.fd.emplace_back( h, quotient );
    const double abs_err = std::abs( quotient - out.adjoint );
    const double rel_err = out.adjoint == 0.0 ? ( abs_err == 0.0 ? 0.0 : abs_err / std::abs( quotient ) )
                                              : abs_err / std::abs( out.adjoint );
    if( abs_err < out.best_abs )
    {
      out.best_abs = abs_err;
      out.best_rel = rel_err;
      out.best_h = h;
    }
  }
  return out;
}

/// Smooth random direction: products of low powers of the scaled coordinates and of t with
/// normal random amplitudes. No parity, so symmetric problems still see a nonzero derivative.
inline SpaceTimeField random_direction( const ControlProblem& prob, std::uint64_t seed )
{
  std::mt19937_64 gen( seed );
  std::normal_distribution<double> nd;
  const SpectralGrid& g = prob.grid();
  const TimeGrid& tg = prob.timegrid();
  const int n = g.size();
  SpaceTimeField V = zero_control( prob );
  for( int c = 0; c < prob.control_components(); ++c )
  {
    double a[3][3][3];
    for( auto& plane : a )
      for( auto& row : plane )
        for( double& v : row )
          v = nd( gen );
    for( int k = 0; k < tg.size(); ++k )
    {
      const double t = tg.times()[k] / tg.horizon();
      for( int i = 0; i < n; ++i )
      {
        const Point p = g.node( i );
        double s[2] = { 0.0, 0.0 };
        for( int d = 0; d < g.dim(); ++d )
        {
          const Interval1D iv = g.axis( d ).interval();
          s[d] = ( 2 * p[d] - iv.a - iv.b ) / iv.length();
        }
        double v = 0.0;
        for( int m = 0; m < 3; ++m )
          for( int l = 0; l < ( g.dim() == 2 ? 3 : 1 ); ++l )
            for( int j = 0; j < 3; ++j )
              v += a[m][l][j] * std::pow( s[0], m ) * std::pow( s[1], l ) * std::pow( t, j );
        V.values( c * n + i, k ) = v;
      }
    }
  }
  return V;
}

} // namespace ddftoc
