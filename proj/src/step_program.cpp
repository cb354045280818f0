#include "planex/step_program.hpp"

#include "planex/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace planex {

using namespace program;

namespace program {

int builtin_arity(std::string_view fn) {
    static const std::map<std::string_view, int> kArity = {
        {"len", 1}, {"sum", 1}, {"min", 1}, {"max", 1}, {"sort", 1}, {"unique", 1},
        {"concat", -1}, {"count", 2}, {"str", 1},
    };
    auto it = kArity.find(fn);
    return it == kArity.end() ? 0 : it->second;
}

namespace {

std::string_view op_text(BinOp op) {
    switch (op) {
        case BinOp::add: return "+";
        case BinOp::sub: return "-";
        case BinOp::mul: return "*";
        case BinOp::div: return "/";
    }
    return "+";
}

std::string_view op_text(CmpOp op) {
    switch (op) {
        case CmpOp::eq: return "==";
        case CmpOp::ne: return "!=";
        case CmpOp::lt: return "<";
        case CmpOp::le: return "<=";
        case CmpOp::gt: return ">";
        case CmpOp::ge: return ">=";
    }
    return "==";
}

std::string render_named(const std::vector<NamedExpr>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i].first + ": " + render(*items[i].second);
    }
    return out;
}

}  // namespace

std::string render(const Expr& e) {
    return std::visit(
        [](const auto& n) -> std::string {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Literal>) {
                return n.value.dump();
            } else if constexpr (std::is_same_v<T, ListLiteral>) {
                std::string out = "[";
                for (std::size_t i = 0; i < n.items.size(); ++i) out += (i ? ", " : "") + render(*n.items[i]);
                return out + "]";
            } else if constexpr (std::is_same_v<T, NameRef>) {
                return n.name;
            } else if constexpr (std::is_same_v<T, FieldAccess>) {
                return render(*n.base) + "." + n.field;
            } else if constexpr (std::is_same_v<T, IndexAccess>) {
                return render(*n.base) + "[" + std::to_string(n.index) + "]";
            } else if constexpr (std::is_same_v<T, BuiltinCall>) {
                std::string out = n.fn + "(";
                for (std::size_t i = 0; i < n.args.size(); ++i) out += (i ? ", " : "") + render(*n.args[i]);
                return out + ")";
            } else if constexpr (std::is_same_v<T, FilterExpr>) {
                return "filter(" + render(*n.list) + ", " + render(*n.pred.lhs) + " " + std::string(op_text(n.pred.op)) +
                       " " + render(*n.pred.rhs) + ")";
            } else if constexpr (std::is_same_v<T, MapExpr>) {
                return "map(" + render(*n.list) + ", " + render(*n.body) + ")";
            } else {
                return "(" + render(*n.lhs) + " " + std::string(op_text(n.op)) + " " + render(*n.rhs) + ")";
            }
        },
        e.node);
}

std::string render(const Statement& s) {
    return std::visit(
        [](const auto& st) -> std::string {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, LetStmt>) {
                return "let " + st.name + " = " + render(*st.expr);
            } else if constexpr (std::is_same_v<T, CallStmt>) {
                return "call " + st.name + " = " + st.tool_id + "(" + render_named(st.args) + ")";
            } else {
                return "return {" + render_named(st.fields) + "}";
            }
        },
        s);
}

}  // namespace program

const ReturnStmt& StepProgram::return_statement() const {
    return std::get<ReturnStmt>(statements.back());
}

std::string StepProgram::render() const {
    std::string out;
    for (const auto& s : statements) out += program::render(s) + "\n";
    return out;
}

// ---------------------------------------------------------------- parsing

namespace {

ExprPtr make(auto node) { return std::make_shared<const Expr>(Expr{std::move(node)}); }

class LineParser {
public:
    LineParser(std::string_view line, int line_no) : s_(line), line_no_(line_no) {}

    Statement statement() {
        auto kw = ident();
        if (kw == "let") {
            LetStmt st;
            st.name = binding_name();
            expect('=');
            st.expr = expr();
            end();
            return st;
        }
        if (kw == "call") {
            CallStmt st;
            st.name = binding_name();
            expect('=');
            st.tool_id = tool_id();
            expect('(');
            skip_ws();
            if (!peek(')')) st.args = named_list(')');
            expect(')');
            end();
            return st;
        }
        if (kw == "return") {
            ReturnStmt st;
            expect('{');
            st.fields = named_list('}');
            if (st.fields.empty()) fail("return record needs at least one field");
            expect('}');
            end();
            return st;
        }
        fail("expected let, call or return, got '" + kw + "'");
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ProgramParseError("line " + std::to_string(line_no_) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < s_.size() && s_[pos_] == c;
    }

    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'" + context());
    }

    std::string context() const {
        if (pos_ >= s_.size()) return " at end of line";
        return " at '" + std::string(s_.substr(pos_, 12)) + "'";
    }

    void end() {
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected trailing text" + context());
    }

    std::string ident() {
        skip_ws();
        auto start = pos_;
        if (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
            ++pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        }
        if (start == pos_) fail("expected identifier" + context());
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string binding_name() {
        auto name = ident();
        static const std::set<std::string, std::less<>> kReserved = {"let", "call", "return", "item", "true",
                                                                     "false", "null", "filter", "map"};
        if (kReserved.count(name) || builtin_arity(name) != 0) fail("'" + name + "' is reserved");
        return name;
    }

    std::string tool_id() {
        skip_ws();
        auto start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                    s_[pos_] == '-' || s_[pos_] == '.')) {
            ++pos_;
        }
        auto id = std::string(s_.substr(start, pos_ - start));
        auto dot = id.find('.');
        if (id.empty() || dot == std::string::npos || dot == 0 || dot + 1 == id.size()) fail("expected tool id" + context());
        return id;
    }

    std::vector<NamedExpr> named_list(char close) {
        std::vector<NamedExpr> out;
        std::set<std::string> seen;
        do {
            if (peek(close) && out.empty()) break;
            auto name = ident();
            if (!seen.insert(name).second) fail("duplicate field '" + name + "'");
            expect(':');
            out.emplace_back(std::move(name), expr());
        } while (accept(','));
        return out;
    }

    ExprPtr expr() { return additive(); }

    ExprPtr additive() {
        auto lhs = multiplicative();
        for (;;) {
            skip_ws();
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
                auto op = s_[pos_++] == '+' ? BinOp::add : BinOp::sub;
                lhs = make(Binary{op, lhs, multiplicative()});
            } else {
                return lhs;
            }
        }
    }

    ExprPtr multiplicative() {
        auto lhs = postfix();
        for (;;) {
            skip_ws();
            if (pos_ < s_.size() && (s_[pos_] == '*' || s_[pos_] == '/')) {
                auto op = s_[pos_++] == '*' ? BinOp::mul : BinOp::div;
                lhs = make(Binary{op, lhs, postfix()});
            } else {
                return lhs;
            }
        }
    }

    ExprPtr postfix() {
        auto base = primary();
        for (;;) {
            if (accept('.')) {
                base = make(FieldAccess{base, ident()});
            } else if (accept('[')) {
                skip_ws();
                auto start = pos_;
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
                if (start == pos_) fail("index must be a non-negative integer" + context());
                auto idx = std::stoll(std::string(s_.substr(start, pos_ - start)));
                expect(']');
                base = make(IndexAccess{base, idx});
            } else {
                return base;
            }
        }
    }

    ExprPtr number() {
        auto start = pos_;
        if (s_[pos_] == '-') ++pos_;
        auto digits = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (digits == pos_) fail("malformed number" + context());
        bool is_float = false;
        if (pos_ < s_.size() && s_[pos_] == '.' && pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1]))) {
            is_float = true;
            ++pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        auto text = std::string(s_.substr(start, pos_ - start));
        if (is_float) return make(Literal{Value(std::stod(text))});
        return make(Literal{Value(static_cast<std::int64_t>(std::stoll(text)))});
    }

    ExprPtr string_literal() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                char e = s_[pos_++];
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case '/': out.push_back('/'); break;
                    default: fail(std::string("unknown escape \\") + e);
                }
            } else {
                out.push_back(c);
            }
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return make(Literal{Value(std::move(out))});
    }

    Predicate predicate() {
        Predicate p;
        p.lhs = expr();
        skip_ws();
        static const std::pair<std::string_view, CmpOp> kOps[] = {
            {"==", CmpOp::eq}, {"!=", CmpOp::ne}, {"<=", CmpOp::le}, {">=", CmpOp::ge}, {"<", CmpOp::lt}, {">", CmpOp::gt},
        };
        bool found = false;
        for (const auto& [text, op] : kOps) {
            if (s_.substr(pos_, text.size()) == text) {
                pos_ += text.size();
                p.op = op;
                found = true;
                break;
            }
        }
        if (!found) fail("expected comparison operator in filter predicate" + context());
        p.rhs = expr();
        return p;
    }

    ExprPtr primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("expected expression at end of line");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
            return number();
        }
        if (c == '"') return string_literal();
        if (c == '[') {
            ++pos_;
            ListLiteral list;
            if (!peek(']')) {
                do {
                    list.items.push_back(expr());
                } while (accept(','));
            }
            expect(']');
            return make(std::move(list));
        }
        if (c == '(') {
            ++pos_;
            auto inner = expr();
            expect(')');
            return inner;
        }
        auto name = ident();
        if (name == "true") return make(Literal{Value(true)});
        if (name == "false") return make(Literal{Value(false)});
        if (name == "null") return make(Literal{Value()});
        if (!peek('(')) return make(NameRef{name});
        ++pos_;
        if (name == "filter") {
            auto list = expr();
            expect(',');
            auto pred = predicate();
            expect(')');
            return make(FilterExpr{list, pred});
        }
        if (name == "map") {
            auto list = expr();
            expect(',');
            auto body = expr();
            expect(')');
            return make(MapExpr{list, body});
        }
        int arity = builtin_arity(name);
        if (arity == 0) fail("unknown function '" + name + "'");
        BuiltinCall call{name, {}};
        if (!peek(')')) {
            do {
                call.args.push_back(expr());
            } while (accept(','));
        }
        expect(')');
        if (arity > 0 && static_cast<int>(call.args.size()) != arity) {
            fail(name + " takes " + std::to_string(arity) + " argument(s)");
        }
        if (arity < 0 && call.args.empty()) fail(name + " takes at least one argument");
        return make(std::move(call));
    }

    std::string_view s_;
    int line_no_;
    std::size_t pos_ = 0;
};

}  // namespace

StepProgram parse_program(std::string_view source) {
    StepProgram prog;
    prog.source_text = std::string(source);
    int line_no = 0;
    std::size_t start = 0;
    while (start <= source.size()) {
        auto nl = source.find('\n', start);
        auto line = source.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        ++line_no;
        bool blank = std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
        if (!blank) {
            if (!prog.statements.empty() && std::holds_alternative<ReturnStmt>(prog.statements.back())) {
                throw ProgramParseError("line " + std::to_string(line_no) + ": return must be the final statement");
            }
            prog.statements.push_back(LineParser(line, line_no).statement());
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    if (prog.statements.empty()) throw ProgramParseError("empty program");
    if (!std::holds_alternative<ReturnStmt>(prog.statements.back())) {
        throw ProgramParseError("program must end with a return statement");
    }
    return prog;
}

// ---------------------------------------------------------------- static checks

namespace {

void check_names(const Expr& e, const std::set<std::string>& bound, bool in_item_scope, const std::string& where) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NameRef>) {
                if (n.name == "item") {
                    if (!in_item_scope) throw StaticCheckError(where + ": 'item' is only bound inside filter/map");
                } else if (!bound.count(n.name)) {
                    throw StaticCheckError(where + ": name '" + n.name + "' is not bound");
                }
            } else if constexpr (std::is_same_v<T, ListLiteral>) {
                for (const auto& i : n.items) check_names(*i, bound, in_item_scope, where);
            } else if constexpr (std::is_same_v<T, FieldAccess> || std::is_same_v<T, IndexAccess>) {
                check_names(*n.base, bound, in_item_scope, where);
            } else if constexpr (std::is_same_v<T, BuiltinCall>) {
                for (const auto& a : n.args) check_names(*a, bound, in_item_scope, where);
            } else if constexpr (std::is_same_v<T, FilterExpr>) {
                check_names(*n.list, bound, in_item_scope, where);
                check_names(*n.pred.lhs, bound, true, where);
                check_names(*n.pred.rhs, bound, true, where);
            } else if constexpr (std::is_same_v<T, MapExpr>) {
                check_names(*n.list, bound, in_item_scope, where);
                check_names(*n.body, bound, true, where);
            } else if constexpr (std::is_same_v<T, Binary>) {
                check_names(*n.lhs, bound, in_item_scope, where);
                check_names(*n.rhs, bound, in_item_scope, where);
            }
        },
        e.node);
}

}  // namespace

void check_program(const StepProgram& prog, std::span<const ToolSpec> shortlist, const VariableStore& ambient) {
    std::set<std::string> bound;
    for (const auto& n : ambient.names()) bound.insert(n);
    for (std::size_t i = 0; i < prog.statements.size(); ++i) {
        const auto& stmt = prog.statements[i];
        const auto where = "statement " + std::to_string(i + 1) + " `" + program::render(stmt) + "`";
        auto bind = [&](const std::string& name) {
            if (!bound.insert(name).second) throw StaticCheckError(where + ": name '" + name + "' is already bound");
        };
        if (const auto* let = std::get_if<LetStmt>(&stmt)) {
            check_names(*let->expr, bound, false, where);
            bind(let->name);
        } else if (const auto* call = std::get_if<CallStmt>(&stmt)) {
            auto it = std::find_if(shortlist.begin(), shortlist.end(), [&](const ToolSpec& t) { return t.tool_id == call->tool_id; });
            if (it == shortlist.end()) throw StaticCheckError(where + ": tool '" + call->tool_id + "' is not in the shortlist");
            for (const auto& [arg, e] : call->args) {
                if (!it->param(arg)) throw StaticCheckError(where + ": tool " + call->tool_id + " has no parameter '" + arg + "'");
                check_names(*e, bound, false, where);
            }
            for (const auto& p : it->params) {
                bool given = std::any_of(call->args.begin(), call->args.end(), [&](const NamedExpr& a) { return a.first == p.name; });
                if (p.required && !given) throw StaticCheckError(where + ": missing required parameter '" + p.name + "'");
            }
            bind(call->name);
        } else {
            for (const auto& [_, e] : std::get<ReturnStmt>(stmt).fields) check_names(*e, bound, false, where);
        }
    }
}

// ---------------------------------------------------------------- evaluation

namespace {

struct EvalError {
    std::string message;
};

bool is_int(const Value& v) { return v.is_number_integer() || v.is_number_unsigned(); }

std::int64_t as_int(const Value& v) { return v.get<std::int64_t>(); }

double as_double(const Value& v) { return v.get<double>(); }

[[noreturn]] void eval_fail(std::string msg) { throw EvalError{std::move(msg)}; }

void require_list(const Value& v, std::string_view ctx) {
    if (!v.is_array()) eval_fail(std::string(ctx) + " expects a list, got " + v.type_name());
}

// numbers compare numerically, strings lexicographically; other kinds fail
int order(const Value& a, const Value& b) {
    if (a.is_number() && b.is_number()) {
        if (is_int(a) && is_int(b)) return as_int(a) < as_int(b) ? -1 : (as_int(a) > as_int(b) ? 1 : 0);
        double x = as_double(a), y = as_double(b);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (a.is_string() && b.is_string()) {
        auto c = a.get_ref<const std::string&>().compare(b.get_ref<const std::string&>());
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    eval_fail(std::string("cannot order ") + a.type_name() + " and " + b.type_name());
}

void require_homogeneous(const Value& list, std::string_view fn) {
    bool nums = std::all_of(list.begin(), list.end(), [](const Value& v) { return v.is_number(); });
    bool strs = std::all_of(list.begin(), list.end(), [](const Value& v) { return v.is_string(); });
    if (!nums && !strs) eval_fail(std::string(fn) + " needs a list of numbers or of strings");
}

Value arith(BinOp op, const Value& a, const Value& b) {
    if (op == BinOp::add && a.is_string() && b.is_string()) return a.get<std::string>() + b.get<std::string>();
    if (op == BinOp::add && a.is_array() && b.is_array()) {
        Value out = a;
        for (const auto& v : b) out.push_back(v);
        return out;
    }
    if (!a.is_number() || !b.is_number()) {
        eval_fail(std::string("arithmetic on ") + a.type_name() + " and " + b.type_name());
    }
    if (op == BinOp::div) {
        if (as_double(b) == 0.0) eval_fail("division by zero");
        return as_double(a) / as_double(b);
    }
    if (is_int(a) && is_int(b)) {
        auto x = as_int(a), y = as_int(b);
        switch (op) {
            case BinOp::add: return x + y;
            case BinOp::sub: return x - y;
            default: return x * y;
        }
    }
    auto x = as_double(a), y = as_double(b);
    switch (op) {
        case BinOp::add: return x + y;
        case BinOp::sub: return x - y;
        default: return x * y;
    }
}

bool compare(CmpOp op, const Value& a, const Value& b) {
    switch (op) {
        case CmpOp::eq: return a == b;
        case CmpOp::ne: return a != b;
        case CmpOp::lt: return order(a, b) < 0;
        case CmpOp::le: return order(a, b) <= 0;
        case CmpOp::gt: return order(a, b) > 0;
        case CmpOp::ge: return order(a, b) >= 0;
    }
    return false;
}

Value call_builtin(const std::string& fn, const std::vector<Value>& args) {
    const Value& x = args.at(0);
    if (fn == "len") {
        if (x.is_array() || x.is_object()) return static_cast<std::int64_t>(x.size());
        if (x.is_string()) return static_cast<std::int64_t>(x.get_ref<const std::string&>().size());
        eval_fail(std::string("len of ") + x.type_name());
    }
    if (fn == "str") return render_plain(x);
    if (fn == "concat") {
        Value out = Value::array();
        for (const auto& a : args) {
            require_list(a, "concat");
            for (const auto& v : a) out.push_back(v);
        }
        return out;
    }
    require_list(x, fn);
    if (fn == "sum") {
        bool all_int = true;
        for (const auto& v : x) {
            if (!v.is_number()) eval_fail("sum needs a list of numbers");
            all_int = all_int && is_int(v);
        }
        if (all_int) {
            std::int64_t s = 0;
            for (const auto& v : x) s += as_int(v);
            return s;
        }
        double s = 0;
        for (const auto& v : x) s += as_double(v);
        return s;
    }
    if (fn == "min" || fn == "max") {
        if (x.empty()) eval_fail(fn + " of an empty list");
        require_homogeneous(x, fn);
        std::size_t best = 0;
        for (std::size_t i = 1; i < x.size(); ++i) {
            int c = order(x[i], x[best]);
            if ((fn == "min" && c < 0) || (fn == "max" && c > 0)) best = i;
        }
        return x[best];
    }
    if (fn == "sort") {
        require_homogeneous(x, fn);
        std::vector<Value> items(x.begin(), x.end());
        std::stable_sort(items.begin(), items.end(), [](const Value& a, const Value& b) { return order(a, b) < 0; });
        return Value(items);
    }
    if (fn == "unique") {
        Value out = Value::array();
        for (const auto& v : x) {
            if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
        }
        return out;
    }
    if (fn == "count") {
        return static_cast<std::int64_t>(std::count(x.begin(), x.end(), args.at(1)));
    }
    eval_fail("unknown builtin " + fn);
}

class Evaluator {
public:
    explicit Evaluator(const std::map<std::string, Value>& env) : env_(env) {}

    Value eval(const Expr& e, const Value* item) {
        return std::visit(
            [&](const auto& n) -> Value {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Literal>) {
                    return n.value;
                } else if constexpr (std::is_same_v<T, ListLiteral>) {
                    Value out = Value::array();
                    for (const auto& i : n.items) out.push_back(eval(*i, item));
                    return out;
                } else if constexpr (std::is_same_v<T, NameRef>) {
                    if (n.name == "item") {
                        if (!item) eval_fail("'item' used outside filter/map");
                        return *item;
                    }
                    auto it = env_.find(n.name);
                    if (it == env_.end()) eval_fail("unbound name '" + n.name + "'");
                    return it->second;
                } else if constexpr (std::is_same_v<T, FieldAccess>) {
                    auto base = eval(*n.base, item);
                    if (!base.is_object()) eval_fail("field access ." + n.field + " on " + base.type_name());
                    auto f = base.find(n.field);
                    if (f == base.end()) eval_fail("record has no field '" + n.field + "'");
                    return *f;
                } else if constexpr (std::is_same_v<T, IndexAccess>) {
                    auto base = eval(*n.base, item);
                    require_list(base, "indexing");
                    if (n.index < 0 || static_cast<std::size_t>(n.index) >= base.size()) {
                        eval_fail("index " + std::to_string(n.index) + " out of range for list of " + std::to_string(base.size()));
                    }
                    return base[static_cast<std::size_t>(n.index)];
                } else if constexpr (std::is_same_v<T, BuiltinCall>) {
                    std::vector<Value> args;
                    args.reserve(n.args.size());
                    for (const auto& a : n.args) args.push_back(eval(*a, item));
                    return call_builtin(n.fn, args);
                } else if constexpr (std::is_same_v<T, FilterExpr>) {
                    auto list = eval(*n.list, item);
                    require_list(list, "filter");
                    Value out = Value::array();
                    for (const auto& el : list) {
                        if (compare(n.pred.op, eval(*n.pred.lhs, &el), eval(*n.pred.rhs, &el))) out.push_back(el);
                    }
                    return out;
                } else if constexpr (std::is_same_v<T, MapExpr>) {
                    auto list = eval(*n.list, item);
                    require_list(list, "map");
                    Value out = Value::array();
                    for (const auto& el : list) out.push_back(eval(*n.body, &el));
                    return out;
                } else {
                    auto l = eval(*n.lhs, item);
                    auto r = eval(*n.rhs, item);
                    return arith(n.op, l, r);
                }
            },
            e.node);
    }

private:
    const std::map<std::string, Value>& env_;
};

}  // namespace

std::string_view to_string(ExecutionResult::Status s) {
    switch (s) {
        case ExecutionResult::Status::ok: return "ok";
        case ExecutionResult::Status::call_failed: return "call_failed";
        case ExecutionResult::Status::expr_error: return "expr_error";
    }
    return "ok";
}

Value ExecutionResult::to_json() const {
    Value log = Value::array();
    for (const auto& c : call_log) log.push_back(Value{{"tool_id", c.tool_id}, {"args_digest", c.args_digest}, {"status_code", c.status_code}});
    Value ret = Value::array();
    for (const auto& v : returned) ret.push_back(v.to_json());
    Value j{{"status", to_string(status)}, {"returned", ret}, {"call_log", log}};
    if (diagnostic) j["diagnostic"] = *diagnostic;
    return j;
}

ExecutionResult execute_program(const StepProgram& prog, const VariableStore& variables, ToolInvoker& tools,
                                const std::string& producer) {
    ExecutionResult result;
    std::map<std::string, Value> env;
    for (const auto& v : variables.all()) env[v.name] = v.value;
    Evaluator ev(env);

    for (std::size_t i = 0; i < prog.statements.size(); ++i) {
        const auto& stmt = prog.statements[i];
        try {
            if (const auto* let = std::get_if<LetStmt>(&stmt)) {
                env[let->name] = ev.eval(*let->expr, nullptr);
            } else if (const auto* call = std::get_if<CallStmt>(&stmt)) {
                Value args = Value::object();
                for (const auto& [name, e] : call->args) args[name] = ev.eval(*e, nullptr);
                CallLogEntry entry{call->tool_id, sha256_hex(args.dump()).substr(0, 16), 0};
                ToolResponse resp;
                try {
                    resp = tools.invoke(call->tool_id, args);
                } catch (const ArgValidationError& e) {
                    result.call_log.push_back(entry);
                    result.status = ExecutionResult::Status::call_failed;
                    result.diagnostic = "call " + call->name + " = " + call->tool_id + " rejected: invalid argument '" + e.param() + "': " + e.what();
                    return result;
                } catch (const Error& e) {
                    result.call_log.push_back(entry);
                    result.status = ExecutionResult::Status::call_failed;
                    result.diagnostic = "call " + call->name + " = " + call->tool_id + " failed: " + e.what();
                    return result;
                }
                entry.status_code = resp.status_code;
                result.call_log.push_back(entry);
                if (!resp.ok()) {
                    result.status = ExecutionResult::Status::call_failed;
                    result.diagnostic = "call " + call->name + " = " + call->tool_id + " failed with status " +
                                        std::to_string(resp.status_code) + (resp.error ? ": " + *resp.error : "");
                    return result;
                }
                env[call->name] = std::move(resp.body);
            } else {
                std::vector<Variable> returned;
                for (const auto& [name, e] : std::get<ReturnStmt>(stmt).fields) {
                    returned.push_back(Variable::make(name, ev.eval(*e, nullptr), producer));
                }
                result.returned = std::move(returned);
            }
        } catch (const EvalError& e) {
            result.status = ExecutionResult::Status::expr_error;
            result.diagnostic = "statement " + std::to_string(i + 1) + " `" + program::render(stmt) + "`: " + e.message;
            result.returned.clear();
            return result;
        }
    }
    return result;
}

}  // namespace planex
