#include <gtest/gtest.h>

#include <ddftoc/specgrid.hpp>

using namespace ddftoc;

namespace {

VectorXd sample_1d( const SpectralGrid& g, double ( *fn )( double ) )
{
  VectorXd v( g.size() );
  for( int i = 0; i < g.size(); ++i )
    v[i] = fn( g.node( i )[0] );
  return v;
}

} // namespace

TEST( Interval, RejectsEmpty )
{
  EXPECT_THROW( Interval1D( 1.0, 1.0 ), InvalidParameter );
  EXPECT_THROW( Interval1D( 1.0, -1.0 ), InvalidParameter );
}

TEST( Grid1D, FiveNodesIncludeEndpointsAndCenter )
{
  const auto g = build_grid_1d( { -1, 1 }, 5 );
  ASSERT_EQ( g.size(), 5 );
  EXPECT_EQ( g.node( 0 )[0], -1.0 );
  EXPECT_EQ( g.node( 4 )[0], 1.0 );
  EXPECT_NEAR( g.node( 2 )[0], 0.0, 1e-15 );
  EXPECT_NEAR( g.node( 1 )[0], -std::sqrt( 0.5 ), 1e-15 );
  EXPECT_NEAR( g.node( 3 )[0], std::sqrt( 0.5 ), 1e-15 );
  EXPECT_EQ( g.boundary_idx(), ( std::vector<int>{ 0, 4 } ) );
}

TEST( Grid1D, MappedEndpointsAreExact )
{
  const auto g = build_grid_1d( { 0.3, 2.7 }, 17 );
  EXPECT_EQ( g.node( 0 )[0], 0.3 );
  EXPECT_EQ( g.node( 16 )[0], 2.7 );
  for( int i = 1; i < g.size(); ++i )
    EXPECT_LT( g.node( i - 1 )[0], g.node( i )[0] );
}

TEST( Grid1D, TooFewPoints ) { EXPECT_THROW( build_grid_1d( { -1, 1 }, 3 ), InvalidResolution ); }

TEST( Grid1D, DifferentiatesQuadraticExactly )
{
  const auto g = build_grid_1d( { -1, 1 }, 12 );
  const VectorXd x = sample_1d( g, []( double x ) { return x; } );
  const VectorXd d = g.diff( 0, x.cwiseProduct( x ) );
  EXPECT_LE( ( d - 2 * x ).cwiseAbs().maxCoeff(), 1e-10 );
}

TEST( Grid1D, WeightsPositiveAndSumToLength )
{
  for( int n : { 4, 5, 10, 31 } )
  {
    const auto g = build_grid_1d( { -1, 1 }, n );
    EXPECT_GT( g.quad_weights().minCoeff(), 0.0 );
    EXPECT_NEAR( g.quad_weights().sum(), 2.0, 1e-12 );
  }
  const auto g = build_grid_1d( { 0, 3 }, 9 );
  EXPECT_NEAR( g.quad_weights().sum(), 3.0, 1e-12 );
}

TEST( Grid1D, RowSumsVanish )
{
  const auto g = build_grid_1d( { -2, 5 }, 30 );
  EXPECT_LE( ( g.d1( 0 ) * VectorXd::Ones( 30 ) ).cwiseAbs().maxCoeff(), 1e-9 );
  EXPECT_LE( ( g.d2( 0 ) * VectorXd::Ones( 30 ) ).cwiseAbs().maxCoeff(), 1e-9 );
}

TEST( Grid1D, SecondDerivativeIsSquareOfFirst )
{
  const auto g = build_grid_1d( { -1, 1 }, 20 );
  EXPECT_LE( ( g.d2( 0 ) - g.d1( 0 ) * g.d1( 0 ) ).cwiseAbs().maxCoeff(), 1e-9 );
}

TEST( Grid1D, SpectralConvergenceOfDerivative )
{
  auto err = []( int n ) {
    const auto g = build_grid_1d( { -1, 1 }, n );
    const VectorXd e = sample_1d( g, []( double x ) { return std::exp( x ); } );
    return ( g.diff( 0, e ) - e ).cwiseAbs().maxCoeff();
  };
  const double e6 = err( 6 ), e10 = err( 10 ), e14 = err( 14 );
  EXPECT_LT( e10, 1e-2 * e6 );
  EXPECT_LT( e14, 1e-2 * e10 );
  EXPECT_LE( err( 24 ), 1e-10 );
}

TEST( Grid1D, SpectralConvergenceOfQuadrature )
{
  auto err = []( int n ) {
    const auto g = build_grid_1d( { -1, 1 }, n );
    return std::abs( g.quadrature( sample_1d( g, []( double x ) { return std::exp( x ); } ) ) - ( M_E - 1 / M_E ) );
  };
  EXPECT_GT( err( 4 ), err( 6 ) );
  EXPECT_GT( err( 6 ), err( 8 ) );
  EXPECT_LE( err( 14 ), 1e-13 );
}

TEST( Quadrature, Examples )
{
  const auto g = build_grid_1d( { -1, 1 }, 30 );
  EXPECT_NEAR( quadrature( g, VectorXd::Ones( 30 ) ), 2.0, 1e-12 );
  EXPECT_NEAR( quadrature( g, sample_1d( g, []( double x ) { return x * x; } ) ), 2.0 / 3.0, 1e-12 );
  EXPECT_NEAR( quadrature( g, sample_1d( g, []( double x ) { return std::exp( x ); } ) ), M_E - 1 / M_E, 1e-12 );
  EXPECT_THROW( quadrature( g, VectorXd::Ones( 29 ) ), ShapeError );
}

TEST( Interpolation, SineAtOffNodePoint )
{
  const auto g = build_grid_1d( { -1, 1 }, 30 );
  const VectorXd v = sample_1d( g, []( double x ) { return std::sin( M_PI * x ); } );
  EXPECT_NEAR( barycentric_interp( g, v, { 0.123, 0.0 } ), std::sin( 0.123 * M_PI ), 1e-10 );
}

TEST( Interpolation, NodesReturnStoredValuesExactly )
{
  const auto g = build_grid_1d( { -1, 1 }, 13 );
  const VectorXd v = VectorXd::Random( 13 );
  for( int j = 0; j < 13; ++j )
    EXPECT_EQ( barycentric_interp( g, v, g.node( j ) ), v[j] );
}

TEST( Interpolation, Constant )
{
  const auto g = build_grid_1d( { -1, 1 }, 9 );
  for( double x : { -0.99, -0.3, 0.0, 0.77 } )
    EXPECT_NEAR( barycentric_interp( g, VectorXd::Constant( 9, 3.25 ), { x, 0.0 } ), 3.25, 1e-14 );
}

TEST( Interpolation, OutsideDomainThrows )
{
  const auto g = build_grid_1d( { -1, 1 }, 9 );
  EXPECT_THROW( barycentric_interp( g, VectorXd::Ones( 9 ), { 1.01, 0.0 } ), ExtrapolationError );
  const auto g2 = build_grid_2d( { -1, 1 }, { 0, 1 }, 5, 6 );
  EXPECT_THROW( barycentric_interp( g2, VectorXd::Ones( 30 ), { 0.0, -0.5 } ), ExtrapolationError );
}

TEST( Interpolation, ResampleIsIdentity2D )
{
  const auto g = build_grid_2d( { -1, 1 }, { -1, 2 }, 7, 9 );
  const VectorXd v = VectorXd::Random( g.size() );
  for( int i = 0; i < g.size(); ++i )
    EXPECT_NEAR( barycentric_interp( g, v, g.node( i ) ), v[i], 1e-14 );
}

TEST( Grid2D, FiveByFiveCounts )
{
  const auto g = build_grid_2d( { -1, 1 }, { -1, 1 }, 5, 5 );
  EXPECT_EQ( g.size(), 25 );
  EXPECT_EQ( g.boundary_idx().size(), 16u );
  EXPECT_NEAR( g.quad_weights().sum(), 4.0, 1e-12 );
  EXPECT_THROW( build_grid_2d( { -1, 1 }, { -1, 1 }, 5, 3 ), InvalidResolution );
}

TEST( Grid2D, NodeOrderingIsFirstDimensionFastest )
{
  const auto g = build_grid_2d( { -1, 1 }, { 0, 2 }, 4, 5 );
  EXPECT_EQ( g.node( 1 )[1], 0.0 );
  EXPECT_GT( g.node( 1 )[0], g.node( 0 )[0] );
  EXPECT_EQ( g.node( 4 )[0], -1.0 );
  EXPECT_GT( g.node( 4 )[1], 0.0 );
}

TEST( Grid2D, NormalsAreUnitAndOutward )
{
  const auto g = build_grid_2d( { -1, 1 }, { -1, 1 }, 6, 7 );
  for( std::size_t b = 0; b < g.boundary_idx().size(); ++b )
  {
    const Point n = g.normals()[b];
    const Point p = g.node( g.boundary_idx()[b] );
    EXPECT_DOUBLE_EQ( n[0] * n[0] + n[1] * n[1], 1.0 );
    EXPECT_GT( n[0] * p[0] + n[1] * p[1], 0.0 );
    // corners use the first-dimension edge
    if( std::abs( p[0] ) == 1.0 )
    {
      EXPECT_EQ( n[1], 0.0 );
    }
  }
}

TEST( Grid2D, LaplacianOfQuadratic )
{
  const auto g = build_grid_2d( { -1, 1 }, { -1, 1 }, 10, 12 );
  VectorXd f( g.size() );
  for( int i = 0; i < g.size(); ++i )
    f[i] = g.node( i )[0] * g.node( i )[0] + g.node( i )[1] * g.node( i )[1];
  const VectorXd lap = g.laplacian( f );
  for( int i = 0; i < g.size(); ++i )
  {
    if( !g.is_boundary( i ) )
    {
      EXPECT_NEAR( lap[i], 4.0, 1e-9 );
    }
  }
}

TEST( Grid2D, MixedDerivativesCommute )
{
  const auto g = build_grid_2d( { -1, 1 }, { -1, 1 }, 14, 15 );
  VectorXd f( g.size() );
  for( int i = 0; i < g.size(); ++i )
    f[i] = std::sin( g.node( i )[0] + 2 * g.node( i )[1] ) * std::exp( g.node( i )[0] );
  const VectorXd a = g.diff( 0, g.diff( 1, f ) ), b = g.diff( 1, g.diff( 0, f ) );
  EXPECT_LE( ( a - b ).cwiseAbs().maxCoeff(), 1e-9 );
}

TEST( Grid2D, LiftedMatricesMatchFastApplication )
{
  const auto g = build_grid_2d( { -1, 1 }, { 0, 3 }, 6, 8 );
  const VectorXd v = VectorXd::Random( g.size() );
  for( int d = 0; d < 2; ++d )
  {
    EXPECT_LE( ( g.d1( d ) * v - g.diff( d, v ) ).cwiseAbs().maxCoeff(), 1e-11 );
    EXPECT_LE( ( g.d2( d ) * v - g.diff2( d, v ) ).cwiseAbs().maxCoeff(), 1e-9 );
  }
}

TEST( TimeGrid, EndpointsAndOrdering )
{
  const TimeGrid tg( 2.5, 20 );
  ASSERT_EQ( tg.size(), 21 );
  EXPECT_EQ( tg.times()[0], 0.0 );
  EXPECT_EQ( tg.times()[20], 2.5 );
  for( int k = 1; k < tg.size(); ++k )
    EXPECT_LT( tg.times()[k - 1], tg.times()[k] );
  EXPECT_NEAR( tg.weights().sum(), 2.5, 1e-12 );
  EXPECT_THROW( TimeGrid( 0.0, 5 ), InvalidParameter );
  EXPECT_THROW( TimeGrid( 1.0, 0 ), InvalidResolution );
}
