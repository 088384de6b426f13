#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include <ddftoc/ddftoc.hpp>

namespace fs = std::filesystem;
using namespace ddftoc;

namespace {

enum Exit { kOk = 0, kConfig = 1, kPartial = 2, kTotal = 3 };

std::string num( double v )
{
  char buf[32];
  std::snprintf( buf, sizeof buf, "%.17g", v );
  return buf;
}

ExperimentConfig resolve( const std::string& what )
{
  if( fs::is_regular_file( what ) )
    return load_config( what );
  for( const auto& c : builtin_experiments() )
    if( c.id == what )
      return c;
  throw ConfigError( "'" + what + "' is neither a readable config file nor a built-in experiment" );
}

std::string cell_dir( std::size_t ik, std::size_t ib ) { return "cell_k" + std::to_string( ik ) + "_b" + std::to_string( ib ); }

void print_summary( const ExperimentConfig& c, const ControlProblem& prob )
{
  std::cout << "experiment " << c.id << ( c.title.empty() ? "" : " (" + c.title + ")" ) << "\n";
  std::cout << c.to_json().dump( 2 ) << "\n";
  std::cout << "grid nodes " << prob.grid().size() << ", boundary nodes " << prob.grid().boundary_idx().size()
            << ", time nodes " << prob.timegrid().size() << ", cells " << c.kappas.size() * c.betas.size() << "\n";
}

void print_table( const std::vector<SweepCell>& cells )
{
  std::printf( "%8s %10s %10s %10s %8s  %s\n", "kappa", "beta", "J_uc", "J_c", "Iter", "status" );
  for( const auto& cell : cells )
  {
    if( cell.failed() )
      std::printf( "%8g %10g %10s %10s %8s  failed: %s\n", cell.kappa, cell.beta, "-", "-", "-", cell.error.c_str() );
    else
      std::printf( "%8g %10g %10.4f %10.4f %8d  %s\n", cell.kappa, cell.beta, cell.run->J_uc, cell.run->J_c,
                   cell.run->iterations, cell.run->status.c_str() );
  }
}

int run( const std::string& what, const std::string& out_dir, int jobs, bool dry_run )
{
  ExperimentConfig cfg;
  std::optional<ControlProblem> base;
  try
  {
    cfg = resolve( what );
    base.emplace( cfg.build_problem() );
    if( jobs < 1 )
      throw ConfigError( "--jobs must be at least 1" );
  }
  catch( const Error& e )
  {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
  if( dry_run )
  {
    print_summary( cfg, *base );
    return kOk;
  }

  const auto cells = sweep( *base, cfg.kappas, cfg.betas, cfg.optimizer(), cfg.integrator(), jobs );

  // single collector: every file is written here, after the workers are done
  fs::create_directories( out_dir );
  const fs::path root( out_dir );
  std::ofstream table( root / "table.csv" );
  table << "kappa,beta,J_uc,J_c,iterations,converged\n";
  nlohmann::json manifest;
  manifest["software"] = { { "name", "ddftoc" }, { "version", kVersion } };
  manifest["config"] = cfg.to_json();
  manifest["artifacts"]["table"] = "table.csv";
  std::size_t failed = 0;
  for( std::size_t c = 0; c < cells.size(); ++c )
  {
    const auto& cell = cells[c];
    const std::size_t ik = c / cfg.betas.size(), ib = c % cfg.betas.size();
    nlohmann::json entry{ { "kappa", cell.kappa }, { "beta", cell.beta }, { "wall_seconds", cell.wall_seconds } };
    if( cell.failed() )
    {
      ++failed;
      table << num( cell.kappa ) << "," << num( cell.beta ) << ",nan,nan,0,failed\n";
      entry["status"] = "failed";
      entry["error"] = cell.error;
      manifest["cells"].push_back( entry );
      continue;
    }
    const auto& r = *cell.run;
    table << num( cell.kappa ) << "," << num( cell.beta ) << "," << num( r.J_uc ) << "," << num( r.J_c ) << ","
          << r.iterations << "," << ( r.converged ? "true" : "false" ) << "\n";
    const ControlProblem prob = base->with_parameters( cell.kappa, cell.beta );
    const fs::path dir = root / cell_dir( ik, ib );
    fs::create_directories( dir );
    write_snapshot( ( dir / "rho.txt" ).string(), "rho", r.P, prob.grid(), prob.timegrid() );
    write_snapshot( ( dir / "w.txt" ).string(), "w", r.W, prob.grid(), prob.timegrid() );
    write_snapshot( ( dir / "q.txt" ).string(), "q", r.Q, prob.grid(), prob.timegrid() );
    entry["J_uc"] = r.J_uc;
    entry["J_c"] = r.J_c;
    entry["iterations"] = r.iterations;
    entry["converged"] = r.converged;
    entry["status"] = r.status;
    entry["final_error"] = r.error_trace.empty() ? 0.0 : r.error_trace.back();
    for( const char* f : { "rho", "w", "q" } )
      entry["files"][f] = cell_dir( ik, ib ) + "/" + f + ".txt";
    manifest["cells"].push_back( entry );
  }
  std::ofstream( root / "manifest.json" ) << manifest.dump( 2 ) << "\n";

  print_table( cells );
  if( failed == cells.size() )
    return kTotal;
  return failed ? kPartial : kOk;
}

} // namespace

int main( int argc, char** argv )
{
  CLI::App app{ "Optimal control of dynamic density functional theory models" };
  app.require_subcommand( 1 );

  std::string what, out_dir = "ddftoc_out";
  int jobs = 1;
  bool dry_run = false;
  auto* run_cmd = app.add_subcommand( "run", "run a (kappa, beta) sweep from a config file or built-in id" );
  run_cmd->add_option( "config", what, "config file or built-in experiment id" )->required();
  run_cmd->add_option( "--out", out_dir, "output directory" );
  run_cmd->add_option( "--jobs", jobs, "worker threads for the sweep" );
  run_cmd->add_flag( "--dry-run", dry_run, "validate and summarize, write nothing" );

  auto* list_cmd = app.add_subcommand( "list-builtins", "list the built-in experiments" );

  try
  {
    app.parse( argc, argv );
  }
  catch( const CLI::ParseError& e )
  {
    return app.exit( e ) == 0 ? 0 : kConfig;
  }

  if( list_cmd->parsed() )
  {
    std::cout << list_builtins();
    return kOk;
  }
  try
  {
    return run( what, out_dir, jobs, dry_run );
  }
  catch( const std::exception& e )
  {
    std::cerr << "error: " << e.what() << "\n";
    return kTotal;
  }
}
