#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "interaction.hpp"

namespace ddftoc {

enum class ControlKind { Flow, Source };

struct BoundaryKind
{
  enum class Type { Dirichlet, NoFlux };
  Type type = Type::NoFlux;
  double c = 0.0; ///< Dirichlet value; unused for no-flux.

  static BoundaryKind dirichlet( double value ) { return { Type::Dirichlet, value }; }
  static BoundaryKind no_flux() { return { Type::NoFlux, 0.0 }; }
  bool is_dirichlet() const { return type == Type::Dirichlet; }
};

using SpatialFunction = std::function<double( const Point& )>;
using SpaceTimeFunction = std::function<double( const Point&, double )>;

/// Node values x (n + 1) time columns. Vector controls stack their components in rows.
struct SpaceTimeField
{
  MatrixXd values;
  int components = 1;

  SpaceTimeField() = default;
  SpaceTimeField( Eigen::Index rows, Eigen::Index cols, int comps = 1 )
      : values( MatrixXd::Zero( rows, cols ) )
      , components( comps )
  {}
  SpaceTimeField( MatrixXd v, int comps )
      : values( std::move( v ) )
      , components( comps )
  {}

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  auto col( Eigen::Index k ) { return values.col( k ); }
  auto col( Eigen::Index k ) const { return values.col( k ); }
};

inline VectorXd sample( const SpectralGrid& grid, const SpatialFunction& fn )
{
  VectorXd out( grid.size() );
  for( int i = 0; i < grid.size(); ++i )
    out[i] = fn( grid.node( i ) );
  return out;
}

inline VectorXd sample( const SpectralGrid& grid, const SpaceTimeFunction& fn, double t )
{
  VectorXd out( grid.size() );
  for( int i = 0; i < grid.size(); ++i )
    out[i] = fn( grid.node( i ), t );
  return out;
}

/// Everything needed to define one optimal control problem.
struct ProblemData
{
  std::shared_ptr<const SpectralGrid> grid;
  TimeGrid timegrid{ 1.0, 20 };
  ControlKind kind = ControlKind::Flow;
  BoundaryKind bc = BoundaryKind::no_flux();
  double kappa = 0.0;
  double beta = 1.0;
  SpatialFunction vext;                 ///< empty means V_ext = 0
  SpaceTimeFunction vext_time;          ///< optional time-dependent V_ext, overrides vext
  SpaceTimeFunction rho_hat;            ///< desired state
  SpaceTimeFunction source;             ///< f; empty means f = 0
  SpatialFunction rho0;                 ///< initial condition
  std::shared_ptr<const InteractionMatrices> interaction; ///< null assembles the Gaussian-gradient kernel
};

class ControlProblem
{
public:
  explicit ControlProblem( ProblemData data )
      : data_( std::move( data ) )
  {
    if( !data_.grid )
      throw InvalidParameter( "problem needs a grid" );
    if( !( data_.beta > 0 ) )
      throw InvalidParameter( "beta must be positive" );
    if( !data_.rho_hat )
      throw InvalidParameter( "problem needs a desired state" );
    if( !data_.rho0 )
      throw InvalidParameter( "problem needs an initial condition" );
    const SpectralGrid& g = *data_.grid;
    if( !data_.interaction )
      data_.interaction = assemble_matrices( g, gaussian_gradient_kernel( g.dim() ) );
    interaction_.emplace( g, data_.interaction, data_.kappa );
    vext_ = data_.vext ? sample( g, data_.vext ) : VectorXd::Zero( g.size() );
    grad_vext_ = g.gradient( vext_ );
    rho0_ = sample( g, data_.rho0 );
    if( bc().type == BoundaryKind::Type::NoFlux && !data_.source )
      initial_mass_ = g.quadrature( rho0_ );
  }

  /// Same problem with a different interaction strength and regularization.
  ControlProblem with_parameters( double kappa, double beta ) const
  {
    ProblemData d = data_;
    d.kappa = kappa;
    d.beta = beta;
    return ControlProblem( std::move( d ) );
  }

  const ProblemData& data() const { return data_; }
  const SpectralGrid& grid() const { return *data_.grid; }
  const TimeGrid& timegrid() const { return data_.timegrid; }
  ControlKind kind() const { return data_.kind; }
  const BoundaryKind& bc() const { return data_.bc; }
  double kappa() const { return data_.kappa; }
  double beta() const { return data_.beta; }
  const InteractionOperator& interaction() const { return *interaction_; }
  const VectorXd& rho0() const { return rho0_; }
  bool has_source() const { return static_cast<bool>( data_.source ); }
  std::optional<double> initial_mass() const { return initial_mass_; }

  int control_components() const { return kind() == ControlKind::Flow ? grid().dim() : 1; }
  int control_size() const { return control_components() * grid().size(); }

  VectorXd vext( double t ) const { return data_.vext_time ? sample( grid(), data_.vext_time, t ) : vext_; }
  VectorXd grad_vext( double t ) const { return data_.vext_time ? grid().gradient( vext( t ) ) : grad_vext_; }
  VectorXd rho_hat( double t ) const { return sample( grid(), data_.rho_hat, t ); }
  VectorXd source( double t ) const { return data_.source ? sample( grid(), data_.source, t ) : VectorXd::Zero( grid().size() ); }

private:
  ProblemData data_;
  std::optional<InteractionOperator> interaction_;
  VectorXd vext_, grad_vext_, rho0_;
  std::optional<double> initial_mass_;
};

namespace detail {

inline void check_finite( const VectorXd& v, const char* what )
{
  if( !v.allFinite() )
    throw NumericalBlowup( std::string( what ) + " produced non-finite values" );
}

inline void check_shapes( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w )
{
  require_size( rho.size(), prob.grid().size(), "density" );
  require_size( w.size(), prob.control_size(), "control" );
}

/// Stacked drift a_d = dV/dx_d - w_d + kappa (C_d rho); the state flux is -(grad rho + rho a).
inline VectorXd state_drift( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w, double t )
{
  VectorXd a = prob.grad_vext( t );
  if( prob.kind() == ControlKind::Flow )
    a -= w;
  if( prob.kappa() != 0.0 )
    a += prob.kappa() * prob.interaction().convolve( rho );
  return a;
}

} // namespace detail

/// d rho / dt at the nodes (interior PDE rows; boundary rows are replaced by the BC in the DAE).
inline VectorXd state_rhs( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w, double t )
{
  detail::check_shapes( prob, rho, w );
  const SpectralGrid& g = prob.grid();
  const int n = g.size();
  const VectorXd a = detail::state_drift( prob, rho, w, t );
  VectorXd out = g.laplacian( rho );
  for( int d = 0; d < g.dim(); ++d )
    out += g.diff( d, rho.cwiseProduct( a.segment( d * n, n ) ) );
  if( prob.kind() == ControlKind::Source )
    out += w;
  if( prob.has_source() )
    out += prob.source( t );
  detail::check_finite( out, "state right-hand side" );
  return out;
}

/// Dirichlet: rho - c. No-flux: d rho/dn + rho (dV/dn - w.n + kappa (C rho).n) = total normal flux.
inline VectorXd state_boundary_residual( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w, double t )
{
  detail::check_shapes( prob, rho, w );
  const SpectralGrid& g = prob.grid();
  const auto& bidx = g.boundary_idx();
  VectorXd out( bidx.size() );
  if( prob.bc().is_dirichlet() )
  {
    for( std::size_t b = 0; b < bidx.size(); ++b )
      out[b] = rho[bidx[b]] - prob.bc().c;
    return out;
  }
  const VectorXd a_n = g.normal_component( detail::state_drift( prob, rho, w, t ) );
  const VectorXd dn = g.normal_derivative( rho );
  for( std::size_t b = 0; b < bidx.size(); ++b )
    out[b] = dn[b] + rho[bidx[b]] * a_n[b];
  return out;
}

/// state_rhs with boundary rows replaced by state_boundary_residual, sharing one drift evaluation.
inline VectorXd state_dae_rhs( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w, double t )
{
  detail::check_shapes( prob, rho, w );
  const SpectralGrid& g = prob.grid();
  const int n = g.size();
  const VectorXd a = detail::state_drift( prob, rho, w, t );
  VectorXd out = g.laplacian( rho );
  for( int d = 0; d < g.dim(); ++d )
    out += g.diff( d, rho.cwiseProduct( a.segment( d * n, n ) ) );
  if( prob.kind() == ControlKind::Source )
    out += w;
  if( prob.has_source() )
    out += prob.source( t );
  const auto& bidx = g.boundary_idx();
  if( prob.bc().is_dirichlet() )
  {
    for( std::size_t b = 0; b < bidx.size(); ++b )
      out[bidx[b]] = rho[bidx[b]] - prob.bc().c;
  }
  else
  {
    const VectorXd a_n = g.normal_component( a );
    const VectorXd dn = g.normal_derivative( rho );
    for( std::size_t b = 0; b < bidx.size(); ++b )
      out[bidx[b]] = dn[b] + rho[bidx[b]] * a_n[b];
  }
  detail::check_finite( out, "state right-hand side" );
  return out;
}

/// Jacobian of state_rhs with respect to rho.
inline MatrixXd state_jacobian( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w, double t )
{
  detail::check_shapes( prob, rho, w );
  const SpectralGrid& g = prob.grid();
  const int n = g.size();
  const VectorXd a = detail::state_drift( prob, rho, w, t );
  MatrixXd jac = g.d2( 0 );
  for( int d = 1; d < g.dim(); ++d )
    jac += g.d2( d );
  for( int d = 0; d < g.dim(); ++d )
  {
    if( prob.kappa() == 0.0 )
    {
      jac += g.d1( d ) * a.segment( d * n, n ).asDiagonal();
      continue;
    }
    MatrixXd inner = prob.kappa() * ( rho.asDiagonal() * prob.interaction().matrix( d ) );
    inner.diagonal() += a.segment( d * n, n );
    jac += g.diff_columns( d, inner );
  }
  return jac;
}

/// Jacobian of state_boundary_residual with respect to rho (rows follow boundary_idx).
inline MatrixXd state_boundary_jacobian( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w, double t )
{
  detail::check_shapes( prob, rho, w );
  const SpectralGrid& g = prob.grid();
  const int n = g.size();
  const auto& bidx = g.boundary_idx();
  MatrixXd jac = MatrixXd::Zero( bidx.size(), n );
  if( prob.bc().is_dirichlet() )
  {
    for( std::size_t b = 0; b < bidx.size(); ++b )
      jac( b, bidx[b] ) = 1.0;
    return jac;
  }
  const VectorXd a_n = g.normal_component( detail::state_drift( prob, rho, w, t ) );
  for( std::size_t b = 0; b < bidx.size(); ++b )
  {
    const int i = bidx[b];
    for( int d = 0; d < g.dim(); ++d )
    {
      const double nd = g.normals()[b][d];
      if( nd == 0.0 )
        continue;
      jac.row( b ) += nd * g.d1( d ).row( i );
      if( prob.kappa() != 0.0 )
        jac.row( b ) += ( nd * prob.kappa() * rho[i] ) * prob.interaction().matrix( d ).row( i );
    }
    jac( b, i ) += a_n[b];
  }
  return jac;
}

namespace detail {

/// Stacked adjoint advection b_d = w_d - dV/dx_d (flow) or -dV/dx_d (source).
inline VectorXd adjoint_drift( const ControlProblem& prob, const VectorXd& w, double t )
{
  VectorXd b = -prob.grad_vext( t );
  if( prob.kind() == ControlKind::Flow )
    b += w;
  return b;
}

} // namespace detail

/// d q / d tau with tau = T - t, evaluated at physical time t:
///   lap q + (w - grad V) . grad q - I*(rho, q) + (rho - rho_hat).
/// conv is the stacked convolution of rho (see InteractionOperator::convolve).
inline VectorXd adjoint_rhs( const ControlProblem& prob, const VectorXd& q, const VectorXd& rho, const VectorXd& conv,
                             const VectorXd& w, double t )
{
  detail::check_shapes( prob, rho, w );
  require_size( q.size(), prob.grid().size(), "adjoint" );
  const SpectralGrid& g = prob.grid();
  const int n = g.size();
  const VectorXd b = detail::adjoint_drift( prob, w, t );
  VectorXd out = g.laplacian( q ) + rho - prob.rho_hat( t );
  for( int d = 0; d < g.dim(); ++d )
    out += b.segment( d * n, n ).cwiseProduct( g.diff( d, q ) );
  if( prob.kappa() != 0.0 )
    out -= prob.interaction().adjoint( rho, q, conv );
  detail::check_finite( out, "adjoint right-hand side" );
  return out;
}

inline VectorXd adjoint_rhs( const ControlProblem& prob, const VectorXd& q, const VectorXd& rho, const VectorXd& w,
                             double t )
{
  require_size( rho.size(), prob.grid().size(), "density" );
  const VectorXd conv = prob.kappa() != 0.0 ? prob.interaction().convolve( rho ) : VectorXd::Zero( prob.grid().dim() * rho.size() );
  return adjoint_rhs( prob, q, rho, conv, w, t );
}

inline MatrixXd adjoint_jacobian( const ControlProblem& prob, const VectorXd& rho, const VectorXd& conv,
                                  const VectorXd& w, double t )
{
  detail::check_shapes( prob, rho, w );
  const SpectralGrid& g = prob.grid();
  const int n = g.size();
  const VectorXd b = detail::adjoint_drift( prob, w, t );
  MatrixXd jac = g.d2( 0 );
  for( int d = 1; d < g.dim(); ++d )
    jac += g.d2( d );
  for( int d = 0; d < g.dim(); ++d )
    jac += b.segment( d * n, n ).asDiagonal() * g.d1( d );
  if( prob.kappa() != 0.0 )
    jac -= prob.interaction().adjoint_jacobian( rho, conv );
  return jac;
}

inline MatrixXd adjoint_jacobian( const ControlProblem& prob, const VectorXd& rho, const VectorXd& w, double t )
{
  require_size( rho.size(), prob.grid().size(), "density" );
  const VectorXd conv = prob.kappa() != 0.0 ? prob.interaction().convolve( rho ) : VectorXd::Zero( prob.grid().dim() * rho.size() );
  return adjoint_jacobian( prob, rho, conv, w, t );
}

/// Dirichlet: q on the boundary. No-flux: dq/dn. Both are local regardless of kappa.
inline VectorXd adjoint_boundary_residual( const ControlProblem& prob, const VectorXd& q )
{
  const SpectralGrid& g = prob.grid();
  require_size( q.size(), g.size(), "adjoint" );
  if( !prob.bc().is_dirichlet() )
    return g.normal_derivative( q );
  const auto& bidx = g.boundary_idx();
  VectorXd out( bidx.size() );
  for( std::size_t b = 0; b < bidx.size(); ++b )
    out[b] = q[bidx[b]];
  return out;
}

inline MatrixXd adjoint_boundary_jacobian( const ControlProblem& prob )
{
  const SpectralGrid& g = prob.grid();
  const auto& bidx = g.boundary_idx();
  MatrixXd jac = MatrixXd::Zero( bidx.size(), g.size() );
  for( std::size_t b = 0; b < bidx.size(); ++b )
  {
    if( prob.bc().is_dirichlet() )
    {
      jac( b, bidx[b] ) = 1.0;
      continue;
    }
    for( int d = 0; d < g.dim(); ++d )
      if( g.normals()[b][d] != 0.0 )
        jac.row( b ) += g.normals()[b][d] * g.d1( d ).row( bidx[b] );
  }
  return jac;
}

/// Control from the gradient equation: beta w + rho grad q = 0 (flow) or beta w + q = 0 (source).
inline VectorXd gradient_update( const ControlProblem& prob, const VectorXd& rho, const VectorXd& q )
{
  if( !( prob.beta() > 0 ) )
    throw InvalidParameter( "beta must be positive" );
  const SpectralGrid& g = prob.grid();
  const int n = g.size();
  require_size( rho.size(), n, "density" );
  require_size( q.size(), n, "adjoint" );
  if( prob.kind() == ControlKind::Source )
    return -q / prob.beta();
  VectorXd w( g.dim() * n );
  for( int d = 0; d < g.dim(); ++d )
    w.segment( d * n, n ) = -rho.cwiseProduct( g.diff( d, q ) ) / prob.beta();
  return w;
}

/// Space-time weighted inner product with Clenshaw-Curtis weights in space and time.
/// Rows may stack several components over the grid nodes.
inline double space_time_inner( const SpectralGrid& grid, const TimeGrid& tg, const MatrixXd& a, const MatrixXd& b )
{
  if( a.rows() != b.rows() || a.cols() != b.cols() || a.cols() != tg.size() || a.rows() % grid.size() != 0 )
    throw ShapeError( "space-time fields do not conform" );
  const int n = grid.size();
  const int comps = static_cast<int>( a.rows() / n );
  double total = 0.0;
  for( int k = 0; k < tg.size(); ++k )
  {
    double s = 0.0;
    for( int c = 0; c < comps; ++c )
      s += grid.quad_weights().dot( a.col( k ).segment( c * n, n ).cwiseProduct( b.col( k ).segment( c * n, n ) ) );
    total += tg.weights()[k] * s;
  }
  return total;
}

/// 1/2 int int (rho - rho_hat)^2 + beta/2 int int |w|^2.
inline double cost( const ControlProblem& prob, const SpaceTimeField& P, const SpaceTimeField& W )
{
  const SpectralGrid& g = prob.grid();
  const TimeGrid& tg = prob.timegrid();
  if( P.rows() != g.size() || P.cols() != tg.size() )
    throw ShapeError( "state field does not conform to the grids" );
  if( W.rows() != prob.control_size() || W.cols() != tg.size() )
    throw ShapeError( "control field does not conform to the grids" );
  MatrixXd misfit = P.values;
  for( int k = 0; k < tg.size(); ++k )
    misfit.col( k ) -= prob.rho_hat( tg.times()[k] );
  return 0.5 * space_time_inner( g, tg, misfit, misfit ) + 0.5 * prob.beta() * space_time_inner( g, tg, W.values, W.values );
}

} // namespace ddftoc
