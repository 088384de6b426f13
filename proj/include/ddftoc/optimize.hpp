#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "integrate.hpp"

namespace ddftoc {

/// max over time nodes of min(relative, absolute) spatial L2 error; stacked components are summed.
inline double error_measure( const SpaceTimeField& y, const SpaceTimeField& y_ref, const SpectralGrid& grid,
                             const TimeGrid& tg )
{
  if( y.rows() != y_ref.rows() || y.cols() != y_ref.cols() )
    throw ShapeError( "error measure needs fields of equal shape" );
  if( y.cols() != tg.size() || y.rows() % grid.size() != 0 || y.rows() == 0 )
    throw ShapeError( "error measure fields do not conform to the grids" );
  const int n = grid.size();
  const int comps = static_cast<int>( y.rows() / n );
  const VectorXd& w = grid.quad_weights();
  double worst = 0.0;
  for( int k = 0; k < tg.size(); ++k )
  {
    double diff2 = 0.0, ref2 = 0.0;
    for( int c = 0; c < comps; ++c )
    {
      const auto d = y.col( k ).segment( c * n, n ) - y_ref.col( k ).segment( c * n, n );
      const auto r = y_ref.col( k ).segment( c * n, n );
      diff2 += w.dot( d.cwiseProduct( d ) );
      ref2 += w.dot( r.cwiseProduct( r ) );
    }
    const double e_abs = std::sqrt( std::max( diff2, 0.0 ) );
    const double e_rel = e_abs / ( std::sqrt( std::max( ref2, 0.0 ) ) + 1e-10 );
    worst = std::max( worst, std::min( e_abs, e_rel ) );
  }
  return worst;
}

struct IterationRecord
{
  int iteration = 0;
  double error = 0.0;
  double cost = 0.0;
};

struct OptimizerConfig
{
  double lambda = 0.01;
  double opt_tol = 1e-4;
  int max_iter = 20000;
  std::optional<SpaceTimeField> w_init; ///< zero control when empty
  int stagnation_window = 200;
  double stagnation_decrease = 1e-12;
  std::function<void( const IterationRecord& )> observer;

  void validate() const
  {
    if( !( lambda > 0 && lambda <= 1 ) )
      throw InvalidParameter( "mixing rate must lie in (0, 1]" );
    if( !( opt_tol > 0 ) )
      throw InvalidParameter( "optimization tolerance must be positive" );
    if( max_iter < 1 )
      throw InvalidParameter( "max_iter must be positive" );
  }
};

struct OptimizationRun
{
  SpaceTimeField P, Q, W;
  double J_uc = 0.0;
  double J_c = 0.0;
  int iterations = 0;
  std::vector<double> error_trace;
  bool converged = false;
  std::string status;
};

inline SpaceTimeField zero_control( const ControlProblem& prob )
{
  return SpaceTimeField( prob.control_size(), prob.timegrid().size(), prob.control_components() );
}

inline SpaceTimeField gradient_update( const ControlProblem& prob, const SpaceTimeField& P, const SpaceTimeField& Q )
{
  SpaceTimeField Wg = zero_control( prob );
  for( int k = 0; k < prob.timegrid().size(); ++k )
    Wg.col( k ) = gradient_update( prob, P.col( k ), Q.col( k ) );
  return Wg;
}

/// Sweeping iteration: state, adjoint, gradient equation, error check, mixing.
inline OptimizationRun fixed_point_solve( const ControlProblem& prob, const OptimizerConfig& ocfg,
                                          const IntegratorConfig& icfg )
{
  ocfg.validate();
  icfg.validate();
  OptimizationRun run;
  SpaceTimeField W = ocfg.w_init ? *ocfg.w_init : zero_control( prob );
  detail::check_control( prob, W );
  W.components = prob.control_components();

  const SpaceTimeField zero = zero_control( prob );
  bool w_is_zero = W.values.isZero( 0.0 );

  double best = std::numeric_limits<double>::infinity();
  int best_at = 0;
  for( int i = 1; i <= ocfg.max_iter; ++i )
  {
    SpaceTimeField P;
    try
    {
      P = solve_state( prob, W, icfg );
    }
    catch( const DivergedSolve& e )
    {
      throw DivergedSolve( e.reason() + " (state solve, iteration " + std::to_string( i ) + ")",
                           e.time() );
    }
    run.iterations = i;
    const double J = cost( prob, P, W );
    if( i == 1 )
      run.J_uc = w_is_zero ? J : cost( prob, solve_state( prob, zero, icfg ), zero );

    SpaceTimeField Q;
    try
    {
      Q = solve_adjoint( prob, P, W, icfg );
    }
    catch( const DivergedSolve& e )
    {
      throw DivergedSolve( e.reason() + " (adjoint solve, iteration " + std::to_string( i ) + ")",
                           e.time() );
    }
    const SpaceTimeField Wg = gradient_update( prob, P, Q );
    const double E = error_measure( W, Wg, prob.grid(), prob.timegrid() );
    run.error_trace.push_back( E );
    if( ocfg.observer )
      ocfg.observer( { i, E, J } );
    log::debug( "iteration " + std::to_string( i ) + " E=" + std::to_string( E ) + " J=" + std::to_string( J ) );

    if( !std::isfinite( E ) )
      throw NumericalBlowup( "error measure is not finite at iteration " + std::to_string( i ) );
    if( E < ocfg.opt_tol )
    {
      run.P = std::move( P );
      run.Q = std::move( Q );
      run.W = W;
      run.J_c = J;
      run.converged = true;
      run.status = "converged";
      return run;
    }
    if( E < best - ocfg.stagnation_decrease )
    {
      best = E;
      best_at = i;
    }
    const bool stagnated = i - best_at >= ocfg.stagnation_window;
    if( stagnated || i == ocfg.max_iter )
    {
      run.P = std::move( P );
      run.Q = std::move( Q );
      run.W = W;
      run.J_c = J;
      run.status = stagnated ? "stagnated" : "max_iter reached";
      return run;
    }
    W.values = ( 1.0 - ocfg.lambda ) * W.values + ocfg.lambda * Wg.values;
    w_is_zero = false;
  }
  return run;
}

struct SweepCell
{
  double kappa = 0.0;
  double beta = 0.0;
  std::optional<OptimizationRun> run;
  std::string error; ///< non-empty when the cell failed
  double wall_seconds = 0.0;

  bool failed() const { return !run.has_value(); }
};

/// Independent runs of every (kappa, beta) pair; cells are ordered kappa-major as listed.
inline std::vector<SweepCell> sweep( const ControlProblem& base, const std::vector<double>& kappas,
                                     const std::vector<double>& betas, const OptimizerConfig& ocfg,
                                     const IntegratorConfig& icfg, int jobs = 1 )
{
  if( kappas.empty() )
    throw InvalidParameter( "sweep needs at least one kappa" );
  if( betas.empty() )
    throw InvalidParameter( "sweep needs at least one beta" );
  std::vector<SweepCell> cells;
  for( double k : kappas )
    for( double b : betas )
      cells.push_back( { k, b, std::nullopt, {}, 0.0 } );

  std::atomic<std::size_t> next{ 0 };
  auto worker = [&] {
    for( std::size_t c = next++; c < cells.size(); c = next++ )
    {
      SweepCell& cell = cells[c];
      const auto start = std::chrono::steady_clock::now();
      try
      {
        const ControlProblem prob = base.with_parameters( cell.kappa, cell.beta );
        cell.run = fixed_point_solve( prob, ocfg, icfg );
      }
      catch( const std::exception& e )
      {
        cell.error = e.what();
        log::warn( "cell kappa=" + std::to_string( cell.kappa ) + " beta=" + std::to_string( cell.beta )
                   + " failed: " + cell.error );
      }
      cell.wall_seconds = std::chrono::duration<double>( std::chrono::steady_clock::now() - start ).count();
    }
  };
  const int n_threads = std::clamp( jobs, 1, static_cast<int>( cells.size() ) );
  if( n_threads == 1 )
    worker();
  else
  {
    std::vector<std::jthread> pool;
    for( int t = 0; t < n_threads; ++t )
      pool.emplace_back( worker );
  }
  return cells;
}

} // namespace ddftoc
