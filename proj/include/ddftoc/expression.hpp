#pragma once

#include <cctype>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ddftoc {

/// Arithmetic expression in t, x (alias x1) and x2, compiled to postfix form.
/// Grammar: + - * / ^ (right associative, binds tighter than unary minus), parentheses,
/// numbers, pi, and the functions sin cos exp sqrt log erf.
class Expression
{
public:
  Expression() = default;

  explicit Expression( std::string source )
      : source_( std::move( source ) )
  {
    pos_ = 0;
    parse_sum();
    skip_space();
    if( pos_ != source_.size() )
      fail( "unexpected '" + std::string( 1, source_[pos_] ) + "'" );
    int depth = 0, max_depth = 0;
    for( const auto& op : code_ )
    {
      depth += op.kind == Op::Num || op.kind == Op::Var ? 1 : op.kind >= Op::Add ? -1 : 0;
      max_depth = std::max( max_depth, depth );
    }
    if( max_depth > kMaxStack )
      fail( "expression too deeply nested" );
  }

  const std::string& source() const { return source_; }
  bool uses_time() const { return uses_[0]; }
  bool uses_x2() const { return uses_[2]; }

  double operator()( double x1, double x2, double t ) const
  {
    double stack[kMaxStack];
    double* sp = stack;
    const double vars[3] = { t, x1, x2 };
    for( const auto& op : code_ )
    {
      switch( op.kind )
      {
        case Op::Num: *sp++ = op.value; break;
        case Op::Var: *sp++ = vars[op.var]; break;
        case Op::Neg: sp[-1] = -sp[-1]; break;
        case Op::Sin: sp[-1] = std::sin( sp[-1] ); break;
        case Op::Cos: sp[-1] = std::cos( sp[-1] ); break;
        case Op::Exp: sp[-1] = std::exp( sp[-1] ); break;
        case Op::Sqrt: sp[-1] = std::sqrt( sp[-1] ); break;
        case Op::Log: sp[-1] = std::log( sp[-1] ); break;
        case Op::Erf: sp[-1] = std::erf( sp[-1] ); break;
        case Op::Add: --sp; sp[-1] += sp[0]; break;
        case Op::Sub: --sp; sp[-1] -= sp[0]; break;
        case Op::Mul: --sp; sp[-1] *= sp[0]; break;
        case Op::Div: --sp; sp[-1] /= sp[0]; break;
        case Op::Pow: --sp; sp[-1] = std::pow( sp[-1], sp[0] ); break;
      }
    }
    return stack[0];
  }

private:
  static constexpr int kMaxStack = 64;
  enum class Op { Num, Var, Neg, Sin, Cos, Exp, Sqrt, Log, Erf, Add, Sub, Mul, Div, Pow };
  struct Instr
  {
    Op kind;
    double value = 0.0;
    int var = 0;
  };

  [[noreturn]] void fail( const std::string& msg ) const
  {
    throw ConfigError( "expression \"" + source_ + "\": " + msg + " at column " + std::to_string( pos_ + 1 ) );
  }

  void skip_space()
  {
    while( pos_ < source_.size() && std::isspace( static_cast<unsigned char>( source_[pos_] ) ) )
      ++pos_;
  }

  bool accept( char c )
  {
    skip_space();
    if( pos_ < source_.size() && source_[pos_] == c )
    {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit( Op k, double v = 0.0, int var = 0 )
  {
    code_.push_back( { k, v, var } );
    if( static_cast<int>( code_.size() ) > 4096 )
      fail( "expression too long" );
  }

  void parse_sum()
  {
    parse_product();
    for( ;; )
    {
      if( accept( '+' ) )
      {
        parse_product();
        emit( Op::Add );
      }
      else if( accept( '-' ) )
      {
        parse_product();
        emit( Op::Sub );
      }
      else
        return;
    }
  }

  void parse_product()
  {
    parse_unary();
    for( ;; )
    {
      if( accept( '*' ) )
      {
        parse_unary();
        emit( Op::Mul );
      }
      else if( accept( '/' ) )
      {
        parse_unary();
        emit( Op::Div );
      }
      else
        return;
    }
  }

  void parse_unary()
  {
    if( ++nesting_ > 64 )
      fail( "nesting too deep" );
    if( accept( '-' ) )
    {
      parse_unary();
      emit( Op::Neg );
    }
    else if( accept( '+' ) )
      parse_unary();
    else
      parse_power();
    --nesting_;
  }

  void parse_power()
  {
    parse_primary();
    if( accept( '^' ) )
    {
      parse_unary();
      emit( Op::Pow );
    }
  }

  void parse_primary()
  {
    skip_space();
    if( pos_ >= source_.size() )
      fail( "unexpected end of input" );
    if( ++nesting_ > 64 )
      fail( "nesting too deep" );
    const char c = source_[pos_];
    if( std::isdigit( static_cast<unsigned char>( c ) ) || c == '.' )
    {
      std::size_t used = 0;
      double v = 0.0;
      try
      {
        v = std::stod( source_.substr( pos_ ), &used );
      }
      catch( const std::exception& )
      {
        fail( "malformed number" );
      }
      pos_ += used;
      emit( Op::Num, v );
    }
    else if( accept( '(' ) )
    {
      parse_sum();
      if( !accept( ')' ) )
        fail( "missing ')'" );
    }
    else if( std::isalpha( static_cast<unsigned char>( c ) ) )
    {
      const std::size_t start = pos_;
      while( pos_ < source_.size() && std::isalnum( static_cast<unsigned char>( source_[pos_] ) ) )
        ++pos_;
      const std::string name = source_.substr( start, pos_ - start );
      if( name == "pi" )
        emit( Op::Num, std::numbers::pi );
      else if( name == "t" || name == "x" || name == "x1" || name == "x2" )
      {
        const int var = name == "t" ? 0 : name == "x2" ? 2 : 1;
        uses_[var] = true;
        emit( Op::Var, 0.0, var );
      }
      else
      {
        Op fn;
        if( name == "sin" )
          fn = Op::Sin;
        else if( name == "cos" )
          fn = Op::Cos;
        else if( name == "exp" )
          fn = Op::Exp;
        else if( name == "sqrt" )
          fn = Op::Sqrt;
        else if( name == "log" )
          fn = Op::Log;
        else if( name == "erf" )
          fn = Op::Erf;
        else
        {
          pos_ = start;
          fail( "unknown identifier '" + name + "'" );
        }
        if( !accept( '(' ) )
          fail( "expected '(' after " + name );
        parse_sum();
        if( !accept( ')' ) )
          fail( "missing ')'" );
        emit( fn );
      }
    }
    else
      fail( "unexpected '" + std::string( 1, c ) + "'" );
    --nesting_;
  }

  std::string source_;
  std::vector<Instr> code_;
  std::size_t pos_ = 0;
  int nesting_ = 0;
  bool uses_[3] = { false, false, false };
};

} // namespace ddftoc
