#include <gtest/gtest.h>

#include <ddftoc/ddftoc.hpp>

using namespace ddftoc;

namespace {

ProblemData base_1d( int N, int n, BoundaryKind bc )
{
  ProblemData d;
  d.grid = std::make_shared<SpectralGrid>( build_grid_1d( { -1, 1 }, N ) );
  d.timegrid = TimeGrid( 1.0, n );
  d.bc = bc;
  d.rho_hat = []( const Point&, double ) { return 0.5; };
  d.rho0 = []( const Point& ) { return 0.5; };
  return d;
}

double max_abs( const MatrixXd& m ) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST( Bdf, ScalarDecay )
{
  DaeSystem sys;
  sys.dof_count = 1;
  sys.rhs = []( const VectorXd& y, double ) { return VectorXd( -y ); };
  BdfDae solver( sys, {} );
  const VectorXd times = VectorXd::LinSpaced( 11, 0.0, 2.0 );
  const MatrixXd y = solver.integrate( VectorXd::Ones( 1 ), times );
  for( int k = 0; k < times.size(); ++k )
    EXPECT_NEAR( y( 0, k ), std::exp( -times[k] ), 1e-7 );
  EXPECT_GT( solver.stats().steps, 0 );
}

TEST( Bdf, StiffLinearSystem )
{
  // eigenvalues -1 and -1e4; the slow mode decays as exp(-t)
  DaeSystem sys;
  sys.dof_count = 2;
  MatrixXd a( 2, 2 );
  a << -1.0, 0.0, 1.0, -1e4;
  sys.rhs = [a]( const VectorXd& y, double ) { return VectorXd( a * y ); };
  sys.jacobian = [a]( const VectorXd&, double ) { return a; };
  BdfDae solver( sys, {} );
  const MatrixXd y = solver.integrate( VectorXd::Ones( 2 ), VectorXd::LinSpaced( 3, 0.0, 1.0 ) );
  EXPECT_NEAR( y( 0, 2 ), std::exp( -1.0 ), 1e-7 );
  EXPECT_NEAR( y( 1, 2 ), std::exp( -1.0 ) / ( 1e4 - 1 ), 1e-8 );
  EXPECT_LT( solver.stats().steps, 2000 );
}

TEST( Bdf, AlgebraicConstraintHeldAtOutputs )
{
  // y0' = -y0, 0 = y1 - y0^2
  DaeSystem sys;
  sys.dof_count = 2;
  sys.algebraic_idx = { 1 };
  sys.rhs = []( const VectorXd& y, double ) {
    VectorXd f( 2 );
    f << -y[0], y[1] - y[0] * y[0];
    return f;
  };
  BdfDae solver( sys, {} );
  const VectorXd times = VectorXd::LinSpaced( 6, 0.0, 1.0 );
  // inconsistent start: projected onto the constraint
  const MatrixXd y = solver.integrate( ( VectorXd( 2 ) << 1.0, 3.0 ).finished(), times );
  for( int k = 0; k < times.size(); ++k )
  {
    EXPECT_NEAR( y( 0, k ), std::exp( -times[k] ), 1e-7 );
    EXPECT_NEAR( y( 1, k ), y( 0, k ) * y( 0, k ), 1e-9 );
  }
}

TEST( Bdf, BlowUpReportsDivergedSolve )
{
  DaeSystem sys;
  sys.dof_count = 1;
  sys.rhs = []( const VectorXd& y, double ) { return VectorXd( y.cwiseProduct( y ) ); };
  BdfDae solver( sys, {} );
  try
  {
    solver.integrate( VectorXd::Ones( 1 ), VectorXd::LinSpaced( 3, 0.0, 2.0 ) );
    FAIL() << "expected DivergedSolve";
  }
  catch( const DivergedSolve& e )
  {
    EXPECT_GT( e.time(), 0.9 );
    EXPECT_LT( e.time(), 1.01 );
  }
}

TEST( Bdf, RejectsBadSetup )
{
  DaeSystem sys;
  sys.dof_count = 2;
  sys.rhs = []( const VectorXd& y, double ) { return y; };
  IntegratorConfig cfg;
  cfg.rel_tol = 0.0;
  EXPECT_THROW( BdfDae( sys, cfg ), InvalidParameter );
  sys.algebraic_idx = { 1, 1 };
  EXPECT_THROW( BdfDae( sys, {} ), ShapeError );
  sys.algebraic_idx = {};
  BdfDae ok( sys, {} );
  EXPECT_THROW( ok.integrate( VectorXd::Ones( 2 ), ( VectorXd( 2 ) << 1.0, 0.5 ).finished() ), InvalidParameter );
  EXPECT_THROW( ok.integrate( VectorXd::Ones( 3 ), VectorXd::LinSpaced( 2, 0.0, 1.0 ) ), ShapeError );
}

TEST( State, HeatKernelDirichlet )
{
  ProblemData d = base_1d( 30, 20, BoundaryKind::dirichlet( 0.0 ) );
  d.rho0 = []( const Point& p ) { return std::cos( M_PI * p[0] / 2 ); };
  const ControlProblem prob( d );
  const SpaceTimeField P = solve_state( prob, zero_control( prob ), {} );
  double worst = 0.0;
  for( int k = 0; k < prob.timegrid().size(); ++k )
  {
    const double t = prob.timegrid().times()[k];
    for( int i = 0; i < prob.grid().size(); ++i )
      worst = std::max( worst, std::abs( P.values( i, k ) - std::exp( -M_PI * M_PI * t / 4 ) * std::cos( M_PI * prob.grid().node( i )[0] / 2 ) ) );
  }
  EXPECT_LE( worst, 1e-6 );
}

TEST( State, UniformIsStationary )
{
  for( double kappa : { -1.0, 0.0, 1.0 } )
  {
    ProblemData d = base_1d( 20, 10, BoundaryKind::no_flux() );
    d.kappa = kappa;
    const ControlProblem prob( d );
    const SpaceTimeField P = solve_state( prob, zero_control( prob ), {} );
    if( kappa == 0.0 )
    {
      EXPECT_LE( max_abs( P.values.array() - 0.5 ), 1e-10 );
    }
    // uniform data violates the no-flux condition when kappa != 0; the trajectory still keeps its mass
    for( int k = 0; k < prob.timegrid().size(); ++k )
      EXPECT_NEAR( prob.grid().quadrature( P.col( k ) ), 1.0, 1e-6 );
  }
}

TEST( State, ExampleOneUncontrolledCost )
{
  const ControlProblem prob = find_builtin( "example1" ).build_problem().with_parameters( 0.0, 1e-3 );
  const SpaceTimeField W = zero_control( prob );
  EXPECT_NEAR( cost( prob, solve_state( prob, W, {} ), W ), 0.0417, 5e-4 );
}

TEST( State, BoundaryResidualWithinTolerance )
{
  const IntegratorConfig cfg;
  for( double kappa : { -1.0, 1.0 } )
  {
    const ControlProblem prob = find_builtin( "example2" ).build_problem().with_parameters( kappa, 1.0 );
    SpaceTimeField W = zero_control( prob );
    for( int k = 0; k < W.cols(); ++k )
      W.col( k ) = sample( prob.grid(), [t = prob.timegrid().times()[k]]( const Point& p ) { return 0.3 * t * std::sin( 2 * p[0] ); } );
    const SpaceTimeField P = solve_state( prob, W, cfg );
    for( int k = 0; k < P.cols(); ++k )
    {
      const double t = prob.timegrid().times()[k];
      const VectorXd r = state_boundary_residual( prob, P.col( k ), W.col( k ), t );
      EXPECT_LE( r.cwiseAbs().maxCoeff(), 10 * cfg.abs_tol ) << "kappa " << kappa << " t " << t;
      EXPECT_NEAR( prob.grid().quadrature( P.col( k ) ), *prob.initial_mass(), 1e-6 );
    }
  }
}

TEST( State, InconsistentInitialDataProjected )
{
  ProblemData d = base_1d( 20, 10, BoundaryKind::dirichlet( 0.0 ) );
  d.rho0 = []( const Point& ) { return 1.0; };
  const ControlProblem prob( d );
  const SpaceTimeField P = solve_state( prob, zero_control( prob ), {} );
  EXPECT_EQ( ( P.col( 0 ) - prob.rho0() ).cwiseAbs().maxCoeff(), 0.0 );
  for( int i : prob.grid().boundary_idx() )
    for( int k = 1; k < P.cols(); ++k )
      EXPECT_NEAR( P.values( i, k ), 0.0, 1e-12 );
}

TEST( State, RefinementStable )
{
  auto run = []( int N ) {
    ExperimentConfig c = find_builtin( "example1" );
    c.points = { N };
    const ControlProblem prob = c.build_problem().with_parameters( 1.0, 1.0 );
    IntegratorConfig cfg;
    cfg.rel_tol = cfg.abs_tol = 1e-10;
    const SpaceTimeField P = solve_state( prob, zero_control( prob ), cfg );
    VectorXd at( 7 );
    for( int j = 0; j < 7; ++j )
      at[j] = barycentric_interp( prob.grid(), P.col( P.cols() - 1 ), { -0.9 + 0.3 * j, 0.0 } );
    return at;
  };
  EXPECT_LE( ( run( 30 ) - run( 60 ) ).cwiseAbs().maxCoeff(), 1e-6 );
}

TEST( State, ControlShapeChecked )
{
  const ControlProblem prob( base_1d( 10, 5, BoundaryKind::no_flux() ) );
  EXPECT_THROW( solve_state( prob, SpaceTimeField( 10, 5 ), {} ), ShapeError );
}

TEST( Adjoint, ZeroMisfitGivesZeroAdjoint )
{
  const ControlProblem prob( base_1d( 20, 10, BoundaryKind::no_flux() ) );
  const SpaceTimeField W = zero_control( prob );
  const SpaceTimeField P = solve_state( prob, W, {} );
  EXPECT_LE( max_abs( solve_adjoint( prob, P, W, {} ).values ), 1e-10 );
}

TEST( Adjoint, FinalColumnIsExactlyZeroAndDirichletHolds )
{
  const ControlProblem prob = find_builtin( "example3" ).build_problem().with_parameters( 1.0, 1.0 );
  const SpaceTimeField W = zero_control( prob );
  const SpaceTimeField Q = solve_adjoint( prob, solve_state( prob, W, {} ), W, {} );
  EXPECT_EQ( Q.col( Q.cols() - 1 ).cwiseAbs().maxCoeff(), 0.0 );
  EXPECT_GT( max_abs( Q.values ), 1e-3 );
  for( int i : prob.grid().boundary_idx() )
    for( int k = 0; k < Q.cols(); ++k )
      EXPECT_NEAR( Q.values( i, k ), 0.0, 1e-10 );
}

TEST( Adjoint, NoFluxConditionHolds )
{
  const ControlProblem prob = find_builtin( "example2" ).build_problem().with_parameters( -1.0, 1.0 );
  const SpaceTimeField W = zero_control( prob );
  const SpaceTimeField Q = solve_adjoint( prob, solve_state( prob, W, {} ), W, {} );
  for( int k = 0; k < Q.cols(); ++k )
    EXPECT_LE( adjoint_boundary_residual( prob, Q.col( k ) ).cwiseAbs().maxCoeff(), 1e-7 );
}

TEST( Adjoint, SymmetricProblemGivesSymmetricAdjoint )
{
  // even initial data, target and potential: q stays even in x
  ProblemData d = base_1d( 25, 16, BoundaryKind::no_flux() );
  d.kappa = 1.0;
  d.rho0 = []( const Point& p ) { return 0.5 + 0.2 * std::cos( M_PI * p[0] ); };
  d.rho_hat = []( const Point& p, double t ) { return 0.5 + 0.3 * t * std::cos( 2 * M_PI * p[0] ); };
  d.vext = []( const Point& p ) { return p[0] * p[0]; };
  const ControlProblem prob( d );
  const SpaceTimeField W = zero_control( prob );
  const SpaceTimeField Q = solve_adjoint( prob, solve_state( prob, W, {} ), W, {} );
  const int n = prob.grid().size();
  for( int k = 0; k < Q.cols(); ++k )
    for( int i = 0; i < n; ++i )
      EXPECT_NEAR( Q.values( i, k ), Q.values( n - 1 - i, k ), 1e-8 );
}

TEST( Manufactured, StateAndAdjointRecoverExactSolution )
{
  auto rho = []( const Jet& x, const Jet&, const Jet& t ) { return ( Jet( 1.0 ) + t ) * cos( Jet( M_PI ) * x ) + Jet( 2.0 ); };
  auto q = []( const Jet& x, const Jet&, const Jet& t ) { return ( Jet( 1.0 ) - t ) * cos( Jet( M_PI ) * x ); };
  for( auto kind : { ControlKind::Source, ControlKind::Flow } )
  {
    ManufacturedSpec spec;
    spec.rho_exact = rho;
    spec.q_exact = q;
    spec.kind = kind;
    spec.beta = kind == ControlKind::Flow ? 2.0 : 1.0;
    const int N = kind == ControlKind::Flow ? 24 : 20;
    const auto mp = make_manufactured( std::make_shared<SpectralGrid>( build_grid_1d( { -1, 1 }, N ) ), TimeGrid( 1.0, 15 ), spec );
    const ControlProblem prob = mp.problem();
    IntegratorConfig cfg;
    cfg.rel_tol = cfg.abs_tol = 1e-10;
    const SpaceTimeField W = mp.exact_control();
    const SpaceTimeField P = solve_state( prob, W, cfg );
    EXPECT_LE( max_abs( P.values - mp.exact_state().values ), 1e-6 );
    const SpaceTimeField Q = solve_adjoint( prob, mp.exact_state(), W, cfg );
    EXPECT_LE( max_abs( Q.values - mp.exact_adjoint().values ), 1e-6 );
  }
}

TEST( Trajectory, EvaluatesBetweenNodes )
{
  const TimeGrid tg( 2.0, 12 );
  SpaceTimeField F( 3, tg.size() );
  for( int k = 0; k < tg.size(); ++k )
  {
    const double t = tg.times()[k];
    F.col( k ) << 1.0, t, t * t * t;
  }
  const VectorXd at = evaluate_trajectory( F, tg, 0.77 );
  EXPECT_NEAR( at[0], 1.0, 1e-13 );
  EXPECT_NEAR( at[1], 0.77, 1e-13 );
  EXPECT_NEAR( at[2], 0.77 * 0.77 * 0.77, 1e-12 );
  for( int k = 0; k < tg.size(); ++k )
    EXPECT_EQ( evaluate_trajectory( F, tg, tg.times()[k] )[2], F.values( 2, k ) );
  EXPECT_THROW( evaluate_trajectory( F, tg, 2.5 ), ExtrapolationError );
  EXPECT_THROW( evaluate_trajectory( SpaceTimeField( 3, 4 ), tg, 1.0 ), ShapeError );
}
