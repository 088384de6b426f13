#pragma once

#include <atomic>
#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

// Library logger on stderr. Verbosity comes from DDFTOC_LOG (error, warn, info, debug); default is warn.

namespace ddftoc::log {

inline std::shared_ptr<spdlog::logger> logger()
{
  static std::shared_ptr<spdlog::logger> lg = [] {
    auto l = spdlog::get( "ddftoc" );
    if( !l )
      l = spdlog::stderr_color_mt( "ddftoc" );
    l->set_pattern( "[ddftoc:%l] %v" );
    const char* env = std::getenv( "DDFTOC_LOG" );
    l->set_level( env ? spdlog::level::from_str( env ) : spdlog::level::warn );
    if( env && l->level() == spdlog::level::off && std::string( env ) != "off" )
      l->set_level( spdlog::level::warn );
    return l;
  }();
  return lg;
}

inline void warn( const std::string& msg ) { logger()->warn( msg ); }
inline void info( const std::string& msg ) { logger()->info( msg ); }
inline void debug( const std::string& msg ) { logger()->debug( msg ); }

// Repeated warnings from inner loops: the first few go out at warn level, the rest at debug.
inline void warn_limited( std::atomic<int>& counter, const std::string& msg, int limit = 3 )
{
  const int seen = counter++;
  if( seen < limit )
    warn( seen + 1 == limit ? msg + " (further occurrences logged at debug level)" : msg );
  else
    debug( msg );
}

} // namespace ddftoc::log
