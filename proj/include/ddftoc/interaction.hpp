#pragma once

#include <functional>
#include <memory>

#include "specgrid.hpp"

namespace ddftoc {

/// Two-point vector kernel K(r, r'); components beyond `dim` are ignored.
struct Kernel
{
  std::function<Point( const Point&, const Point& )> evaluator;
  int dim = 1;
  bool is_odd = false;
};

/// K(r, r') = grad V2(r - r') with V2(x) = exp(-|x|^2).
inline Kernel gaussian_gradient_kernel( int dim )
{
  Kernel k;
  k.dim = dim;
  k.is_odd = true;
  k.evaluator = [dim]( const Point& r, const Point& rp ) {
    Point diff{ r[0] - rp[0], dim == 2 ? r[1] - rp[1] : 0.0 };
    const double g = -2.0 * std::exp( -( diff[0] * diff[0] + diff[1] * diff[1] ) );
    return Point{ g * diff[0], g * diff[1] };
  };
  return k;
}

/// Quadrature matrices C_d(i, j) = w_j K_d(r_i, r_j), one per spatial component.
/// Independent of kappa, so one assembly serves every interaction strength on a grid.
struct InteractionMatrices
{
  std::vector<MatrixXd> components;
  Kernel kernel;
};

inline std::shared_ptr<const InteractionMatrices> assemble_matrices( const SpectralGrid& grid, const Kernel& kernel )
{
  if( kernel.dim != grid.dim() )
    throw ShapeError( "kernel dimension " + std::to_string( kernel.dim ) + " does not match grid dimension "
                      + std::to_string( grid.dim() ) );
  const int n = grid.size();
  auto out = std::make_shared<InteractionMatrices>();
  out->kernel = kernel;
  out->components.assign( grid.dim(), MatrixXd( n, n ) );
  const VectorXd& w = grid.quad_weights();
  for( int j = 0; j < n; ++j )
  {
    const Point rj = grid.node( j );
    for( int i = 0; i < n; ++i )
    {
      const Point k = kernel.evaluator( grid.node( i ), rj );
      for( int d = 0; d < grid.dim(); ++d )
      {
        if( !std::isfinite( k[d] ) )
          throw NumericalBlowup( "kernel is not finite at a node pair; singular kernels are not supported" );
        out->components[d]( i, j ) = w[j] * k[d];
      }
    }
  }
  return out;
}

/// Non-local mean-field interaction I(rho) = kappa rho(r) int rho(r') K(r, r') dr' and its adjoint.
class InteractionOperator
{
public:
  InteractionOperator( const SpectralGrid& grid, std::shared_ptr<const InteractionMatrices> matrices, double kappa )
      : grid_( &grid )
      , matrices_( std::move( matrices ) )
      , kappa_( kappa )
  {
    if( !matrices_ || static_cast<int>( matrices_->components.size() ) != grid.dim() )
      throw ShapeError( "interaction matrices do not match the grid" );
    for( const auto& c : matrices_->components )
      if( c.rows() != grid.size() || c.cols() != grid.size() )
        throw ShapeError( "interaction matrices do not match the grid" );
  }

  double kappa() const { return kappa_; }
  const SpectralGrid& grid() const { return *grid_; }
  const MatrixXd& matrix( int d ) const { return matrices_->components[d]; }
  const Kernel& kernel() const { return matrices_->kernel; }
  std::shared_ptr<const InteractionMatrices> matrices() const { return matrices_; }
  int dim() const { return grid_->dim(); }

  /// Stacked int rho(r') K(r, r') dr' (no kappa, no pointwise rho factor).
  VectorXd convolve( const Eigen::Ref<const VectorXd>& rho ) const
  {
    const int n = grid_->size();
    require_size( rho.size(), n, "interaction" );
    VectorXd out( dim() * n );
    for( int d = 0; d < dim(); ++d )
      out.segment( d * n, n ).noalias() = matrix( d ) * rho;
    return out;
  }

  /// Stacked flux I(rho).
  VectorXd flux( const Eigen::Ref<const VectorXd>& rho ) const
  {
    const int n = grid_->size();
    VectorXd out = convolve( rho );
    for( int d = 0; d < dim(); ++d )
      out.segment( d * n, n ) = kappa_ * rho.cwiseProduct( out.segment( d * n, n ) );
    return out;
  }

  VectorXd divergence( const Eigen::Ref<const VectorXd>& rho ) const
  {
    if( kappa_ == 0.0 )
    {
      require_size( rho.size(), grid_->size(), "interaction" );
      return VectorXd::Zero( grid_->size() );
    }
    return grid_->divergence( flux( rho ) );
  }

  /// Adjoint interaction term, general (two-integral) form:
  ///   kappa (int rho(r') K(r, r') dr') . grad q(r) + kappa int rho(r') K(r', r) . grad q(r') dr'.
  VectorXd adjoint( const Eigen::Ref<const VectorXd>& rho, const Eigen::Ref<const VectorXd>& q ) const
  {
    return adjoint( rho, q, convolve( rho ) );
  }

  /// As above with conv = convolve(rho) supplied by the caller.
  VectorXd adjoint( const Eigen::Ref<const VectorXd>& rho, const Eigen::Ref<const VectorXd>& q,
                    const Eigen::Ref<const VectorXd>& conv ) const
  {
    const int n = grid_->size();
    require_size( rho.size(), n, "adjoint interaction" );
    require_size( q.size(), n, "adjoint interaction" );
    require_size( conv.size(), dim() * n, "adjoint interaction" );
    VectorXd out = VectorXd::Zero( n );
    if( kappa_ == 0.0 )
      return out;
    const VectorXd& w = grid_->quad_weights();
    for( int d = 0; d < dim(); ++d )
    {
      const VectorXd dq = grid_->diff( d, q );
      out += conv.segment( d * n, n ).cwiseProduct( dq );
      // K_d(r_j, r_i) = C_d(j, i) / w_i
      const VectorXd weighted = w.cwiseProduct( rho ).cwiseProduct( dq );
      out.noalias() += ( matrix( d ).transpose() * weighted ).cwiseQuotient( w );
    }
    return kappa_ * out;
  }

  /// Single-integral form valid for odd kernels:
  ///   kappa int rho(r') K(r, r') . [grad q(r) - grad q(r')] dr'.
  VectorXd adjoint_odd( const Eigen::Ref<const VectorXd>& rho, const Eigen::Ref<const VectorXd>& q ) const
  {
    const int n = grid_->size();
    require_size( rho.size(), n, "adjoint interaction" );
    require_size( q.size(), n, "adjoint interaction" );
    VectorXd out = VectorXd::Zero( n );
    for( int d = 0; d < dim(); ++d )
    {
      const VectorXd dq = grid_->diff( d, q );
      out += ( matrix( d ) * rho ).cwiseProduct( dq ) - matrix( d ) * rho.cwiseProduct( dq );
    }
    return kappa_ * out;
  }

  /// Jacobian of divergence(rho): kappa sum_d D_d (diag(C_d rho) + diag(rho) C_d).
  MatrixXd divergence_jacobian( const Eigen::Ref<const VectorXd>& rho ) const
  {
    const int n = grid_->size();
    MatrixXd jac = MatrixXd::Zero( n, n );
    if( kappa_ == 0.0 )
      return jac;
    for( int d = 0; d < dim(); ++d )
    {
      MatrixXd inner = rho.asDiagonal() * matrix( d );
      inner.diagonal() += matrix( d ) * rho;
      jac += grid_->diff_columns( d, inner );
    }
    return kappa_ * jac;
  }

  /// Jacobian of adjoint(rho, .) with respect to q (the term is linear in q).
  MatrixXd adjoint_jacobian( const Eigen::Ref<const VectorXd>& rho ) const { return adjoint_jacobian( rho, convolve( rho ) ); }

  MatrixXd adjoint_jacobian( const Eigen::Ref<const VectorXd>& rho, const Eigen::Ref<const VectorXd>& conv ) const
  {
    const int n = grid_->size();
    MatrixXd jac = MatrixXd::Zero( n, n );
    if( kappa_ == 0.0 )
      return jac;
    const VectorXd& w = grid_->quad_weights();
    for( int d = 0; d < dim(); ++d )
    {
      MatrixXd left = w.cwiseInverse().asDiagonal() * matrix( d ).transpose() * w.cwiseProduct( rho ).asDiagonal();
      left.diagonal() += conv.segment( d * n, n );
      jac += grid_->diff_rows( d, left );
    }
    return kappa_ * jac;
  }

private:
  const SpectralGrid* grid_;
  std::shared_ptr<const InteractionMatrices> matrices_;
  double kappa_;
};

inline InteractionOperator assemble( const SpectralGrid& grid, const Kernel& kernel, double kappa )
{
  return InteractionOperator( grid, assemble_matrices( grid, kernel ), kappa );
}

inline VectorXd interaction_flux( const InteractionOperator& op, const Eigen::Ref<const VectorXd>& rho )
{
  return op.flux( rho );
}

inline VectorXd interaction_divergence( const InteractionOperator& op, const SpectralGrid& grid,
                                        const Eigen::Ref<const VectorXd>& rho )
{
  if( &grid != &op.grid() && grid.size() != op.grid().size() )
    throw ShapeError( "interaction operator was assembled on a different grid" );
  return op.divergence( rho );
}

inline VectorXd adjoint_interaction( const InteractionOperator& op, const SpectralGrid& grid,
                                     const Eigen::Ref<const VectorXd>& rho, const Eigen::Ref<const VectorXd>& q )
{
  if( &grid != &op.grid() && grid.size() != op.grid().size() )
    throw ShapeError( "interaction operator was assembled on a different grid" );
  return op.adjoint( rho, q );
}

} // namespace ddftoc
