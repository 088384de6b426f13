#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ddftoc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Spatial coordinate. One-dimensional grids leave the second entry at zero.
using Point = std::array<double, 2>;

struct Interval1D
{
  double a;
  double b;

  Interval1D( double left, double right )
      : a( left )
      , b( right )
  {
    if( !( a < b ) )
      throw InvalidParameter( "interval requires a < b" );
  }

  double length() const { return b - a; }
};

/// Chebyshev-Gauss-Lobatto points on [a,b] together with the operators that live on them.
/// All arrays are indexed in ascending node order.
class ChebyshevAxis
{
public:
  ChebyshevAxis( Interval1D interval, int n_points )
      : interval_( interval )
      , n_( n_points )
  {
    if( n_points < 2 )
      throw InvalidResolution( "Chebyshev axis needs at least 2 points" );
    build();
  }

  const Interval1D& interval() const { return interval_; }
  int size() const { return n_; }
  const VectorXd& nodes() const { return nodes_; }
  const VectorXd& weights() const { return weights_; }
  const VectorXd& bary_weights() const { return bary_; }
  const MatrixXd& d1() const { return d1_; }
  const MatrixXd& d2() const { return d2_; }

  /// Lagrange basis evaluated at x. Exactly a unit vector when x is a node.
  VectorXd interpolation_row( double x ) const
  {
    const double a = interval_.a, b = interval_.b;
    const double slack = 1e-13 * ( b - a );
    if( x < a - slack || x > b + slack )
      throw ExtrapolationError( "query " + std::to_string( x ) + " outside [" + std::to_string( a ) + ", "
                                + std::to_string( b ) + "]" );
    x = std::min( std::max( x, a ), b );
    VectorXd row = VectorXd::Zero( n_ );
    for( int j = 0; j < n_; ++j )
    {
      if( x == nodes_[j] )
      {
        row[j] = 1.0;
        return row;
      }
    }
    double denom = 0.0;
    for( int j = 0; j < n_; ++j )
    {
      row[j] = bary_[j] / ( x - nodes_[j] );
      denom += row[j];
    }
    row /= denom;
    return row;
  }

  double interpolate( const Eigen::Ref<const VectorXd>& values, double x ) const
  {
    require_size( values.size(), n_, "barycentric interpolation" );
    return interpolation_row( x ).dot( values );
  }

private:
  void build()
  {
    const int m = n_ - 1;
    const double pi = std::numbers::pi;
    VectorXd ref( n_ );
    for( int j = 0; j < n_; ++j )
      ref[j] = std::sin( pi * ( 2.0 * j - m ) / ( 2.0 * m ) );
    ref[0] = -1.0;
    ref[m] = 1.0;

    const double half = 0.5 * interval_.length();
    nodes_ = ( ref.array() * half + 0.5 * ( interval_.a + interval_.b ) ).matrix();
    nodes_[0] = interval_.a;
    nodes_[m] = interval_.b;

    bary_.resize( n_ );
    for( int j = 0; j < n_; ++j )
      bary_[j] = ( j % 2 ? -1.0 : 1.0 ) * ( ( j == 0 || j == m ) ? 0.5 : 1.0 );

    // First derivative on the reference interval, diagonal by the negative-sum trick.
    d1_ = MatrixXd::Zero( n_, n_ );
    for( int i = 0; i < n_; ++i )
    {
      double diag = 0.0;
      for( int j = 0; j < n_; ++j )
      {
        if( i == j )
          continue;
        const double ci = ( i == 0 || i == m ) ? 2.0 : 1.0;
        const double cj = ( j == 0 || j == m ) ? 2.0 : 1.0;
        const double sign = ( ( i + j ) % 2 ) ? -1.0 : 1.0;
        d1_( i, j ) = ( ci / cj ) * sign / ( ref[i] - ref[j] );
        diag -= d1_( i, j );
      }
      d1_( i, i ) = diag;
    }
    d1_ /= half;
    d2_ = d1_ * d1_;

    // Clenshaw-Curtis weights.
    weights_ = VectorXd::Zero( n_ );
    VectorXd v = VectorXd::Ones( std::max( m - 1, 0 ) );
    if( m % 2 == 0 )
    {
      weights_[0] = weights_[m] = 1.0 / ( m * double( m ) - 1.0 );
      for( int k = 1; k < m / 2; ++k )
        for( int i = 1; i < m; ++i )
          v[i - 1] -= 2.0 * std::cos( 2.0 * k * pi * i / m ) / ( 4.0 * k * k - 1.0 );
      for( int i = 1; i < m; ++i )
        v[i - 1] -= std::cos( m * pi * i / m ) / ( m * double( m ) - 1.0 );
    }
    else
    {
      weights_[0] = weights_[m] = 1.0 / ( m * double( m ) );
      for( int k = 1; k <= ( m - 1 ) / 2; ++k )
        for( int i = 1; i < m; ++i )
          v[i - 1] -= 2.0 * std::cos( 2.0 * k * pi * i / m ) / ( 4.0 * k * k - 1.0 );
    }
    for( int i = 1; i < m; ++i )
      weights_[i] = 2.0 * v[i - 1] / m;
    weights_ *= half;
  }

  Interval1D interval_;
  int n_;
  VectorXd nodes_, weights_, bary_;
  MatrixXd d1_, d2_;
};

/// Tensor-product Chebyshev grid in one or two dimensions.
///
/// Node ordering is dimension-1-fastest: node (i1, i2) has flat index i1 + N1 * i2.
/// Vector fields are stored component-major ("stacked"): component d of a field over
/// n nodes occupies entries [d * n, (d + 1) * n).
class SpectralGrid
{
public:
  explicit SpectralGrid( std::vector<ChebyshevAxis> axes )
      : axes_( std::move( axes ) )
  {
    if( axes_.empty() || axes_.size() > 2 )
      throw InvalidParameter( "SpectralGrid supports 1 or 2 dimensions" );
    build();
  }

  int dim() const { return static_cast<int>( axes_.size() ); }
  int size() const { return n_; }
  const ChebyshevAxis& axis( int d ) const { return axes_[d]; }
  std::vector<int> points_per_dim() const
  {
    std::vector<int> out;
    for( const auto& ax : axes_ )
      out.push_back( ax.size() );
    return out;
  }

  Point node( int i ) const
  {
    const int n1 = axes_[0].size();
    Point p{ axes_[0].nodes()[i % n1], 0.0 };
    if( dim() == 2 )
      p[1] = axes_[1].nodes()[i / n1];
    return p;
  }

  const VectorXd& quad_weights() const { return weights_; }
  const std::vector<int>& boundary_idx() const { return boundary_; }
  const std::vector<Point>& normals() const { return normals_; }
  /// Lifted dense first/second derivative matrices along dimension d.
  const MatrixXd& d1( int d ) const { return lifted_d1_[d]; }
  const MatrixXd& d2( int d ) const { return lifted_d2_[d]; }
  /// True for nodes in boundary_idx.
  bool is_boundary( int i ) const { return boundary_mask_[i]; }

  double measure() const
  {
    double m = 1.0;
    for( const auto& ax : axes_ )
      m *= ax.interval().length();
    return m;
  }

  VectorXd diff( int d, const Eigen::Ref<const VectorXd>& v ) const { return apply_axis( d, v, false ); }
  VectorXd diff2( int d, const Eigen::Ref<const VectorXd>& v ) const { return apply_axis( d, v, true ); }

  VectorXd laplacian( const Eigen::Ref<const VectorXd>& v ) const
  {
    VectorXd out = diff2( 0, v );
    for( int d = 1; d < dim(); ++d )
      out += diff2( d, v );
    return out;
  }

  /// Stacked gradient (dim * size entries).
  VectorXd gradient( const Eigen::Ref<const VectorXd>& v ) const
  {
    require_size( v.size(), n_, "gradient" );
    VectorXd g( dim() * n_ );
    for( int d = 0; d < dim(); ++d )
      g.segment( d * n_, n_ ) = diff( d, v );
    return g;
  }

  VectorXd divergence( const Eigen::Ref<const VectorXd>& field ) const
  {
    require_size( field.size(), dim() * n_, "divergence" );
    VectorXd out = diff( 0, field.segment( 0, n_ ) );
    for( int d = 1; d < dim(); ++d )
      out += diff( d, field.segment( d * n_, n_ ) );
    return out;
  }

  /// Normal component of a stacked vector field at each boundary node.
  VectorXd normal_component( const Eigen::Ref<const VectorXd>& field ) const
  {
    require_size( field.size(), dim() * n_, "normal component" );
    VectorXd out( boundary_.size() );
    for( std::size_t b = 0; b < boundary_.size(); ++b )
    {
      double s = 0.0;
      for( int d = 0; d < dim(); ++d )
        s += normals_[b][d] * field[d * n_ + boundary_[b]];
      out[b] = s;
    }
    return out;
  }

  VectorXd normal_derivative( const Eigen::Ref<const VectorXd>& v ) const { return normal_component( gradient( v ) ); }

  /// D_d applied to every column of m (m has size() rows).
  MatrixXd diff_columns( int d, const MatrixXd& m ) const
  {
    require_size( m.rows(), n_, "diff_columns" );
    const int n1 = axes_[0].size();
    if( dim() == 1 )
      return axes_[0].d1() * m;
    if( d == 0 )
    {
      MatrixXd out( m.rows(), m.cols() );
      Eigen::Map<const MatrixXd> in_v( m.data(), n1, m.size() / n1 );
      Eigen::Map<MatrixXd> out_v( out.data(), n1, m.size() / n1 );
      out_v.noalias() = axes_[0].d1() * in_v;
      return out;
    }
    const int n2 = axes_[1].size();
    MatrixXd out( m.rows(), m.cols() );
    for( Eigen::Index c = 0; c < m.cols(); ++c )
    {
      Eigen::Map<const MatrixXd> x( m.col( c ).data(), n1, n2 );
      Eigen::Map<MatrixXd> y( out.col( c ).data(), n1, n2 );
      y.noalias() = x * axes_[1].d1().transpose();
    }
    return out;
  }

  /// m * D_d (m has size() columns).
  MatrixXd diff_rows( int d, const MatrixXd& m ) const
  {
    require_size( m.cols(), n_, "diff_rows" );
    const int n1 = axes_[0].size();
    if( dim() == 1 )
      return m * axes_[0].d1();
    MatrixXd out( m.rows(), m.cols() );
    if( d == 0 )
    {
      for( int j2 = 0; j2 < axes_[1].size(); ++j2 )
        out.middleCols( j2 * n1, n1 ).noalias() = m.middleCols( j2 * n1, n1 ) * axes_[0].d1();
      return out;
    }
    const Eigen::Index rows = m.rows() * n1;
    Eigen::Map<const MatrixXd> in_v( m.data(), rows, axes_[1].size() );
    Eigen::Map<MatrixXd> out_v( out.data(), rows, axes_[1].size() );
    out_v.noalias() = in_v * axes_[1].d1();
    return out;
  }

  double quadrature( const Eigen::Ref<const VectorXd>& values ) const
  {
    require_size( values.size(), n_, "quadrature" );
    return weights_.dot( values );
  }

  /// Tensor barycentric interpolation of nodal values at p.
  double interpolate( const Eigen::Ref<const VectorXd>& values, const Point& p ) const
  {
    require_size( values.size(), n_, "barycentric interpolation" );
    const VectorXd r1 = axes_[0].interpolation_row( p[0] );
    if( dim() == 1 )
      return r1.dot( values );
    const VectorXd r2 = axes_[1].interpolation_row( p[1] );
    Eigen::Map<const MatrixXd> x( values.data(), axes_[0].size(), axes_[1].size() );
    return r1.dot( x * r2 );
  }

private:
  VectorXd apply_axis( int d, const Eigen::Ref<const VectorXd>& v, bool second ) const
  {
    require_size( v.size(), n_, "differentiation" );
    const MatrixXd& op = second ? axes_[d].d2() : axes_[d].d1();
    if( dim() == 1 )
      return op * v;
    const int n1 = axes_[0].size(), n2 = axes_[1].size();
    VectorXd out( n_ );
    Eigen::Map<const MatrixXd> x( v.data(), n1, n2 );
    Eigen::Map<MatrixXd> y( out.data(), n1, n2 );
    if( d == 0 )
      y.noalias() = op * x;
    else
      y.noalias() = x * op.transpose();
    return out;
  }

  void build()
  {
    n_ = 1;
    for( const auto& ax : axes_ )
      n_ *= ax.size();
    const int n1 = axes_[0].size();

    if( dim() == 1 )
    {
      weights_ = axes_[0].weights();
      lifted_d1_ = { axes_[0].d1() };
      lifted_d2_ = { axes_[0].d2() };
      boundary_ = { 0, n1 - 1 };
      normals_ = { Point{ -1.0, 0.0 }, Point{ 1.0, 0.0 } };
    }
    else
    {
      const int n2 = axes_[1].size();
      weights_.resize( n_ );
      for( int i2 = 0; i2 < n2; ++i2 )
        for( int i1 = 0; i1 < n1; ++i1 )
          weights_[i1 + n1 * i2] = axes_[0].weights()[i1] * axes_[1].weights()[i2];

      const MatrixXd i_n1 = MatrixXd::Identity( n1, n1 ), i_n2 = MatrixXd::Identity( n2, n2 );
      lifted_d1_ = { kron( i_n2, axes_[0].d1() ), kron( axes_[1].d1(), i_n1 ) };
      lifted_d2_ = { kron( i_n2, axes_[0].d2() ), kron( axes_[1].d2(), i_n1 ) };

      // Corners take the normal of the dimension-1 edge.
      for( int i2 = 0; i2 < n2; ++i2 )
        for( int i1 = 0; i1 < n1; ++i1 )
        {
          Point normal{ 0.0, 0.0 };
          if( i1 == 0 )
            normal[0] = -1.0;
          else if( i1 == n1 - 1 )
            normal[0] = 1.0;
          else if( i2 == 0 )
            normal[1] = -1.0;
          else if( i2 == n2 - 1 )
            normal[1] = 1.0;
          else
            continue;
          boundary_.push_back( i1 + n1 * i2 );
          normals_.push_back( normal );
        }
    }
    boundary_mask_.assign( n_, false );
    for( int b : boundary_ )
      boundary_mask_[b] = true;
  }

  static MatrixXd kron( const MatrixXd& a, const MatrixXd& b )
  {
    MatrixXd out( a.rows() * b.rows(), a.cols() * b.cols() );
    for( Eigen::Index i = 0; i < a.rows(); ++i )
      for( Eigen::Index j = 0; j < a.cols(); ++j )
        out.block( i * b.rows(), j * b.cols(), b.rows(), b.cols() ) = a( i, j ) * b;
    return out;
  }

  std::vector<ChebyshevAxis> axes_;
  int n_ = 0;
  VectorXd weights_;
  std::vector<MatrixXd> lifted_d1_, lifted_d2_;
  std::vector<int> boundary_;
  std::vector<Point> normals_;
  std::vector<bool> boundary_mask_;
};

inline SpectralGrid build_grid_1d( Interval1D interval, int n )
{
  if( n < 4 )
    throw InvalidResolution( "spatial grids need N >= 4, got " + std::to_string( n ) );
  return SpectralGrid( { ChebyshevAxis( interval, n ) } );
}

inline SpectralGrid build_grid_2d( Interval1D first, Interval1D second, int n1, int n2 )
{
  if( n1 < 4 || n2 < 4 )
    throw InvalidResolution( "spatial grids need N1, N2 >= 4" );
  return SpectralGrid( { ChebyshevAxis( first, n1 ), ChebyshevAxis( second, n2 ) } );
}

/// Chebyshev time nodes on [0, T]: n steps, n + 1 ascending points.
class TimeGrid
{
public:
  TimeGrid( double horizon, int n_steps )
      : axis_( make_axis( horizon, n_steps ) )
      , horizon_( horizon )
      , n_( n_steps )
  {}

  double horizon() const { return horizon_; }
  int steps() const { return n_; }
  int size() const { return n_ + 1; }
  const VectorXd& times() const { return axis_.nodes(); }
  const VectorXd& weights() const { return axis_.weights(); }
  const ChebyshevAxis& axis() const { return axis_; }

  VectorXd interpolation_row( double t ) const { return axis_.interpolation_row( t ); }

private:
  static ChebyshevAxis make_axis( double horizon, int n_steps )
  {
    if( !( horizon > 0 ) )
      throw InvalidParameter( "time horizon must be positive" );
    if( n_steps < 1 )
      throw InvalidResolution( "time grid needs at least one step" );
    return ChebyshevAxis( Interval1D( 0.0, horizon ), n_steps + 1 );
  }

  ChebyshevAxis axis_;
  double horizon_;
  int n_;
};

inline double barycentric_interp( const SpectralGrid& grid, const Eigen::Ref<const VectorXd>& values, const Point& p )
{
  return grid.interpolate( values, p );
}

inline double barycentric_interp( const TimeGrid& tg, const Eigen::Ref<const VectorXd>& values, double t )
{
  return tg.axis().interpolate( values, t );
}

inline double quadrature( const SpectralGrid& grid, const Eigen::Ref<const VectorXd>& values )
{
  return grid.quadrature( values );
}

} // namespace ddftoc
