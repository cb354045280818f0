#pragma once

#include "planex/tool_spec.hpp"
#include "planex/value.hpp"
#include "planex/variables.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace planex {

// Constrained workflow language executed by the API sub-agent:
//
//   program  := line+                      line := let | call | return
//   let      := "let" IDENT "=" expr
//   call     := "call" IDENT "=" TOOLID "(" [IDENT ":" expr ("," IDENT ":" expr)*] ")"
//   return   := "return" "{" IDENT ":" expr ("," IDENT ":" expr)* "}"
//   expr     := literal | IDENT | expr "." IDENT | expr "[" INT "]"
//             | BUILTIN "(" expr ("," expr)* ")" | "filter" "(" expr "," predicate ")"
//             | "map" "(" expr "," expr-over-item ")" | expr ("+"|"-"|"*"|"/") expr
//   predicate := expr-over-item comparison expr
//
// Parentheses may group sub-expressions.
namespace program {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class BinOp { add, sub, mul, div };
enum class CmpOp { eq, ne, lt, le, gt, ge };

struct Literal { Value value; };
struct ListLiteral { std::vector<ExprPtr> items; };
struct NameRef { std::string name; };
struct FieldAccess { ExprPtr base; std::string field; };
struct IndexAccess { ExprPtr base; std::int64_t index = 0; };
struct BuiltinCall { std::string fn; std::vector<ExprPtr> args; };
struct Predicate { ExprPtr lhs; CmpOp op = CmpOp::eq; ExprPtr rhs; };
struct FilterExpr { ExprPtr list; Predicate pred; };
struct MapExpr { ExprPtr list; ExprPtr body; };
struct Binary { BinOp op = BinOp::add; ExprPtr lhs; ExprPtr rhs; };

struct Expr {
    std::variant<Literal, ListLiteral, NameRef, FieldAccess, IndexAccess, BuiltinCall, FilterExpr, MapExpr, Binary> node;
};

using NamedExpr = std::pair<std::string, ExprPtr>;

struct LetStmt { std::string name; ExprPtr expr; };
struct CallStmt { std::string name; std::string tool_id; std::vector<NamedExpr> args; };
struct ReturnStmt { std::vector<NamedExpr> fields; };

using Statement = std::variant<LetStmt, CallStmt, ReturnStmt>;

std::string render(const Expr& e);
std::string render(const Statement& s);

// Builtins and their arity; -1 means "one or more".
int builtin_arity(std::string_view fn);

}  // namespace program

struct StepProgram {
    std::vector<program::Statement> statements;
    std::string source_text;

    const program::ReturnStmt& return_statement() const;
    std::string render() const;
};

// Throws ProgramParseError with the offending line number.
StepProgram parse_program(std::string_view source);

// Binding order, tools restricted to the shortlist, and call arguments
// checked against the ToolSpec. Throws StaticCheckError naming the statement.
void check_program(const StepProgram& prog, std::span<const ToolSpec> shortlist, const VariableStore& ambient);

struct CallLogEntry {
    std::string tool_id;
    std::string args_digest;
    int status_code = 0;

    friend bool operator==(const CallLogEntry&, const CallLogEntry&) = default;
};

struct ExecutionResult {
    enum class Status { ok, call_failed, expr_error };

    std::vector<Variable> returned;
    std::vector<CallLogEntry> call_log;
    Status status = Status::ok;
    std::optional<std::string> diagnostic;

    Value to_json() const;
};

std::string_view to_string(ExecutionResult::Status s);

// Evaluates statements in order. Never throws for program-level failures;
// they are reported in status/diagnostic. Returned variables carry `producer`.
ExecutionResult execute_program(const StepProgram& prog, const VariableStore& variables, ToolInvoker& tools,
                                const std::string& producer = "program");

}  // namespace planex
