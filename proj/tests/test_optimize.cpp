#include <gtest/gtest.h>

#include <ddftoc/ddftoc.hpp>

using namespace ddftoc;

namespace {

ControlProblem example1( double kappa, double beta ) { return find_builtin( "example1" ).build_problem().with_parameters( kappa, beta ); }

struct ThrowingObserver : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

} // namespace

TEST( ErrorMeasure, RelativeAndAbsoluteBranches )
{
  const auto g = build_grid_1d( { -1, 1 }, 10 );
  const TimeGrid tg( 1.0, 4 );
  const SpaceTimeField ones( MatrixXd::Ones( 10, 5 ), 1 );
  EXPECT_EQ( error_measure( ones, ones, g, tg ), 0.0 );
  // relative 0.1 beats absolute 0.1 sqrt(2)
  EXPECT_NEAR( error_measure( SpaceTimeField( MatrixXd::Constant( 10, 5, 1.1 ), 1 ), ones, g, tg ), 0.1, 1e-9 );
  // zero reference: absolute
  EXPECT_NEAR( error_measure( SpaceTimeField( MatrixXd::Constant( 10, 5, 1e-3 ), 1 ), SpaceTimeField( 10, 5 ), g, tg ),
               1e-3 * std::sqrt( 2.0 ), 1e-12 );
  // large reference with a small absolute difference: absolute
  EXPECT_NEAR( error_measure( SpaceTimeField( MatrixXd::Constant( 10, 5, 1e-6 ), 1 ), SpaceTimeField( 10, 5 ), g, tg ),
               1e-6 * std::sqrt( 2.0 ), 1e-15 );
}

TEST( ErrorMeasure, WorstTimeNodeAndComponents )
{
  const auto g = build_grid_1d( { -1, 1 }, 8 );
  const TimeGrid tg( 1.0, 3 );
  SpaceTimeField a( 16, 4, 2 ), b( 16, 4, 2 );
  a.values( 3, 2 ) = 0.0;
  b.values.col( 2 ).tail( 8 ).setConstant( 0.01 );
  EXPECT_NEAR( error_measure( a, b, g, tg ), 0.01 * std::sqrt( 2.0 ), 1e-12 );
  EXPECT_THROW( error_measure( a, SpaceTimeField( 16, 3, 2 ), g, tg ), ShapeError );
  EXPECT_THROW( error_measure( SpaceTimeField( 15, 4 ), SpaceTimeField( 15, 4 ), g, tg ), ShapeError );
}

TEST( OptimizerConfig, Validation )
{
  const ControlProblem prob = example1( 0.0, 1.0 );
  OptimizerConfig o;
  o.lambda = 0.0;
  EXPECT_THROW( fixed_point_solve( prob, o, {} ), InvalidParameter );
  o.lambda = 1.5;
  EXPECT_THROW( fixed_point_solve( prob, o, {} ), InvalidParameter );
  o.lambda = 0.01;
  o.opt_tol = 0.0;
  EXPECT_THROW( fixed_point_solve( prob, o, {} ), InvalidParameter );
  o.opt_tol = 1e-4;
  o.w_init = SpaceTimeField( 3, 3 );
  EXPECT_THROW( fixed_point_solve( prob, o, {} ), ShapeError );
}

TEST( FixedPoint, LargeRegularizationStopsAfterOneSweep )
{
  for( double kappa : { -1.0, 0.0, 1.0 } )
  {
    const auto run = fixed_point_solve( example1( kappa, 1e3 ), {}, {} );
    EXPECT_TRUE( run.converged );
    EXPECT_EQ( run.iterations, 1 );
    EXPECT_EQ( run.J_uc, run.J_c );
    EXPECT_EQ( run.W.values.cwiseAbs().maxCoeff(), 0.0 );
    EXPECT_EQ( run.error_trace.size(), 1u );
  }
}

TEST( FixedPoint, ReachableTargetNeedsNoControl )
{
  ExperimentConfig c = find_builtin( "example1" );
  c.rho_hat = InputFunction::parse( "1/2" );
  const auto run = fixed_point_solve( c.build_problem().with_parameters( 0.0, 1e-3 ), {}, {} );
  EXPECT_TRUE( run.converged );
  EXPECT_EQ( run.iterations, 1 );
  EXPECT_LE( run.J_c, 1e-16 );
  EXPECT_LE( run.Q.values.cwiseAbs().maxCoeff(), 1e-10 );
}

TEST( FixedPoint, IterationCapReported )
{
  OptimizerConfig o;
  o.max_iter = 3;
  std::vector<IterationRecord> seen;
  o.observer = [&]( const IterationRecord& r ) { seen.push_back( r ); };
  const auto run = fixed_point_solve( example1( 0.0, 1e-3 ), o, {} );
  EXPECT_FALSE( run.converged );
  EXPECT_EQ( run.status, "max_iter reached" );
  EXPECT_EQ( run.iterations, 3 );
  ASSERT_EQ( seen.size(), 3u );
  EXPECT_EQ( seen[2].iteration, 3 );
  // mixing with a small rate lowers the cost from the uncontrolled value
  EXPECT_NEAR( seen[0].cost, run.J_uc, 1e-15 );
  EXPECT_LT( seen[2].cost, seen[0].cost );
  EXPECT_LT( seen[2].error, seen[0].error );
}

TEST( FixedPoint, WarmStartKeepsUncontrolledReference )
{
  const ControlProblem prob = example1( 0.0, 1e-1 );
  OptimizerConfig o;
  o.max_iter = 2;
  const auto first = fixed_point_solve( prob, o, {} );
  o.w_init = first.W;
  o.w_init->values.setConstant( 0.01 );
  const auto warm = fixed_point_solve( prob, o, {} );
  EXPECT_NEAR( warm.J_uc, first.J_uc, 1e-14 );
}

TEST( FixedPoint, GradientFieldMatchesPointwiseUpdate )
{
  const ControlProblem prob = example1( 1.0, 0.5 );
  const SpaceTimeField W = zero_control( prob );
  const SpaceTimeField P = solve_state( prob, W, {} );
  const SpaceTimeField Q = solve_adjoint( prob, P, W, {} );
  const SpaceTimeField Wg = gradient_update( prob, P, Q );
  for( int k = 0; k < P.cols(); ++k )
    EXPECT_EQ( ( Wg.col( k ) - gradient_update( prob, P.col( k ), Q.col( k ) ) ).cwiseAbs().maxCoeff(), 0.0 );
}

TEST( Sweep, RejectsEmptyLists )
{
  const ControlProblem prob = example1( 0.0, 1.0 );
  EXPECT_THROW( sweep( prob, {}, { 1.0 }, {}, {} ), InvalidParameter );
  EXPECT_THROW( sweep( prob, { 0.0 }, {}, {}, {} ), InvalidParameter );
}

TEST( Sweep, SingleCell )
{
  const auto cells = sweep( example1( 0.0, 1.0 ), { 0.0 }, { 1e3 }, {}, {} );
  ASSERT_EQ( cells.size(), 1u );
  ASSERT_FALSE( cells[0].failed() );
  EXPECT_EQ( cells[0].run->iterations, 1 );
  EXPECT_NEAR( cells[0].run->J_uc, 0.0417, 5e-4 );
}

TEST( Sweep, FailuresAreCapturedPerCell )
{
  OptimizerConfig o;
  // cells with an interaction start above this uncontrolled cost
  o.observer = []( const IterationRecord& r ) {
    if( r.cost > 0.0430 )
      throw ThrowingObserver( "cost too high" );
  };
  const auto cells = sweep( example1( 0.0, 1.0 ), { -1.0, 0.0, 1.0 }, { 1e3 }, o, {} );
  ASSERT_EQ( cells.size(), 3u );
  EXPECT_TRUE( cells[0].failed() );
  EXPECT_EQ( cells[0].error, "cost too high" );
  EXPECT_FALSE( cells[1].failed() );
  EXPECT_TRUE( cells[2].failed() );
}

TEST( Sweep, ParallelOrderMatchesSerial )
{
  const ControlProblem base = example1( 0.0, 1.0 );
  const std::vector<double> kappas{ -1.0, 0.0, 1.0 }, betas{ 1e3, 1e2 };
  const auto serial = sweep( base, kappas, betas, {}, {}, 1 );
  const auto parallel = sweep( base, kappas, betas, {}, {}, 3 );
  ASSERT_EQ( serial.size(), 6u );
  ASSERT_EQ( parallel.size(), 6u );
  for( std::size_t c = 0; c < 6; ++c )
  {
    EXPECT_EQ( serial[c].kappa, kappas[c / 2] );
    EXPECT_EQ( serial[c].beta, betas[c % 2] );
    EXPECT_EQ( parallel[c].kappa, serial[c].kappa );
    EXPECT_EQ( parallel[c].beta, serial[c].beta );
    ASSERT_FALSE( parallel[c].failed() );
    EXPECT_EQ( parallel[c].run->J_c, serial[c].run->J_c );
    EXPECT_EQ( parallel[c].run->iterations, serial[c].run->iterations );
  }
}
