#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "model.hpp"

// Field snapshots: one JSON header line, then one text row per stored value row
// (grid node, component-major) with one column per time node, printed with %.17g.

namespace ddftoc {

struct Snapshot
{
  std::string name;
  SpaceTimeField field;
  nlohmann::json header; ///< grid and time description as read back
};

inline nlohmann::json snapshot_header( const std::string& name, const SpaceTimeField& F, const SpectralGrid& grid,
                                       const TimeGrid& tg )
{
  nlohmann::json h;
  h["format"] = "ddftoc-snapshot-1";
  h["field"] = name;
  h["rows"] = F.rows();
  h["cols"] = F.cols();
  h["components"] = F.components;
  h["dim"] = grid.dim();
  for( int d = 0; d < grid.dim(); ++d )
  {
    const auto& ax = grid.axis( d );
    h["domain"].push_back( { ax.interval().a, ax.interval().b } );
    h["points"].push_back( ax.size() );
  }
  h["node_order"] = grid.dim() == 1 ? "x ascending" : "x1 fastest, then x2, both ascending";
  h["T"] = tg.horizon();
  h["time_nodes"] = std::vector<double>( tg.times().data(), tg.times().data() + tg.size() );
  return h;
}

inline void write_snapshot( const std::string& path, const std::string& name, const SpaceTimeField& F,
                            const SpectralGrid& grid, const TimeGrid& tg )
{
  if( F.cols() != tg.size() || F.rows() != F.components * static_cast<Eigen::Index>( grid.size() ) )
    throw ShapeError( "snapshot field '" + name + "' does not conform to the grids" );
  std::ofstream out( path );
  if( !out )
    throw Error( "cannot write snapshot '" + path + "'" );
  out << snapshot_header( name, F, grid, tg ).dump() << "\n";
  char buf[32];
  for( Eigen::Index i = 0; i < F.rows(); ++i )
  {
    for( Eigen::Index k = 0; k < F.cols(); ++k )
    {
      std::snprintf( buf, sizeof buf, "%.17g", F.values( i, k ) );
      out << ( k ? " " : "" ) << buf;
    }
    out << "\n";
  }
  if( !out )
    throw Error( "failed writing snapshot '" + path + "'" );
}

inline Snapshot read_snapshot( const std::string& path )
{
  std::ifstream in( path );
  if( !in )
    throw Error( "cannot read snapshot '" + path + "'" );
  std::string line;
  std::getline( in, line );
  Snapshot s;
  try
  {
    s.header = nlohmann::json::parse( line );
  }
  catch( const nlohmann::json::exception& e )
  {
    throw Error( "snapshot '" + path + "': bad header: " + e.what() );
  }
  s.name = s.header.value( "field", "" );
  const auto rows = s.header.at( "rows" ).get<Eigen::Index>();
  const auto cols = s.header.at( "cols" ).get<Eigen::Index>();
  s.field = SpaceTimeField( rows, cols, s.header.at( "components" ).get<int>() );
  for( Eigen::Index i = 0; i < rows; ++i )
  {
    if( !std::getline( in, line ) )
      throw Error( "snapshot '" + path + "': truncated at row " + std::to_string( i ) );
    const char* p = line.c_str();
    for( Eigen::Index k = 0; k < cols; ++k )
    {
      char* end = nullptr;
      const double v = std::strtod( p, &end );
      if( end == p )
        throw Error( "snapshot '" + path + "': bad value at row " + std::to_string( i ) + ", column "
                     + std::to_string( k ) );
      s.field.values( i, k ) = v;
      p = end;
    }
  }
  return s;
}

} // namespace ddftoc
