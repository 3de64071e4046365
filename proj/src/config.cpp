#include "easey/config.hpp"

#include "easey/batchgen.hpp"
#include "easey/error.hpp"
#include "easey/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <limits>

namespace easey {

using nlohmann::json;

std::string_view to_string(Protocol p) {
    switch (p) {
    case Protocol::https: return "https";
    case Protocol::scp: return "scp";
    case Protocol::ftp: return "ftp";
    case Protocol::gridftp: return "gridftp";
    }
    return "?";
}

std::optional<Protocol> protocol_from_string(std::string_view s) {
    if (s == "https") return Protocol::https;
    if (s == "scp") return Protocol::scp;
    if (s == "ftp") return Protocol::ftp;
    if (s == "gridftp") return Protocol::gridftp;
    return std::nullopt;
}

std::optional<Clocktime> Clocktime::parse(std::string_view text) {
    auto first = text.find(':');
    auto last = text.rfind(':');
    if (first == std::string_view::npos || first == last)
        return std::nullopt;
    auto hh = text.substr(0, first);
    auto mm = text.substr(first + 1, last - first - 1);
    auto ss = text.substr(last + 1);
    auto digits = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(),
                                         [](char c) { return c >= '0' && c <= '9'; });
    };
    if (hh.size() < 2 || mm.size() != 2 || ss.size() != 2 || !digits(hh) ||
        !digits(mm) || !digits(ss))
        return std::nullopt;
    Clocktime t;
    auto [p, ec] = std::from_chars(hh.data(), hh.data() + hh.size(), t.hours);
    if (ec != std::errc{})
        return std::nullopt;
    t.minutes = (mm[0] - '0') * 10 + (mm[1] - '0');
    t.seconds = (ss[0] - '0') * 10 + (ss[1] - '0');
    if (t.minutes >= 60 || t.seconds >= 60)
        return std::nullopt;
    return t;
}

std::string Clocktime::str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", hours, minutes, seconds);
    return buf;
}

JobId::JobId(std::string value) : value_(std::move(value)) {
    if (!is_valid(value_))
        throw ValueError("invalid job id '" + value_ + "'");
}

bool JobId::is_valid(std::string_view value) {
    return value.size() == 16 &&
           std::all_of(value.begin(), value.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

// ---------------------------------------------------------------------------

std::string_view to_string(ViolationCode code) {
    switch (code) {
#define CASE(x) case ViolationCode::x: return #x
        CASE(SYNTAX_ERROR);
        CASE(SECTION_MISSING);
        CASE(UNKNOWN_KEY);
        CASE(DUPLICATE_KEY);
        CASE(FIELD_MISSING);
        CASE(TYPE_MISMATCH);
        CASE(PROTOCOL_UNKNOWN);
        CASE(STEP_KIND_INVALID);
        CASE(NAME_EMPTY);
        CASE(MAIL_INVALID);
        CASE(INTEGER_INVALID);
        CASE(NODES_NONPOSITIVE);
        CASE(CORES_PER_TASK_NONPOSITIVE);
        CASE(TASKS_PER_NODE_NONPOSITIVE);
        CASE(RAM_INVALID);
        CASE(CLOCKTIME_INVALID);
        CASE(MPI_TASKS_NONPOSITIVE);
        CASE(COMMAND_EMPTY);
        CASE(EXECUTION_EMPTY);
        CASE(LOCATION_EMPTY);
        CASE(MOUNT_NOT_ABSOLUTE);
        CASE(PROTOCOL_UNSUPPORTED_GRIDFTP);
        CASE(NODES_MISMATCH);
#undef CASE
    }
    return "?";
}

ErrorClass error_class(ViolationCode code) {
    switch (code) {
    case ViolationCode::SYNTAX_ERROR:
        return ErrorClass::syntax;
    case ViolationCode::SECTION_MISSING:
    case ViolationCode::UNKNOWN_KEY:
    case ViolationCode::DUPLICATE_KEY:
    case ViolationCode::FIELD_MISSING:
    case ViolationCode::TYPE_MISMATCH:
    case ViolationCode::PROTOCOL_UNKNOWN:
    case ViolationCode::STEP_KIND_INVALID:
        return ErrorClass::schema;
    case ViolationCode::PROTOCOL_UNSUPPORTED_GRIDFTP:
    case ViolationCode::NODES_MISMATCH:
        return ErrorClass::policy;
    default:
        return ErrorClass::value;
    }
}

Severity severity(ViolationCode code) {
    return code == ViolationCode::NODES_MISMATCH ? Severity::warning : Severity::error;
}

bool ValidationReport::submittable() const noexcept {
    return std::none_of(violations.begin(), violations.end(), [](const Violation& v) {
        return severity(v.code) == Severity::error;
    });
}

bool ValidationReport::has(ViolationCode code) const noexcept {
    return count(code) > 0;
}

std::size_t ValidationReport::count(ViolationCode code) const noexcept {
    return static_cast<std::size_t>(std::count_if(
        violations.begin(), violations.end(),
        [code](const Violation& v) { return v.code == code; }));
}

// ---------------------------------------------------------------------------
// Document tree. nlohmann's DOM drops repeated keys, so the document is read
// through the SAX interface into a tree that keeps members in order.

namespace {

struct Node {
    enum class Kind { null, boolean, integer, floating, string, array, object };
    Kind kind = Kind::null;
    bool b = false;
    std::int64_t i = 0;
    bool int_overflow = false;
    double d = 0;
    std::string s;
    std::vector<Node> items;
    std::vector<std::pair<std::string, Node>> members;

    const char* kind_name() const {
        switch (kind) {
        case Kind::null: return "null";
        case Kind::boolean: return "boolean";
        case Kind::integer: return "integer";
        case Kind::floating: return "number";
        case Kind::string: return "string";
        case Kind::array: return "array";
        case Kind::object: return "object";
        }
        return "?";
    }
};

class TreeBuilder : public nlohmann::json_sax<json> {
public:
    Node root;
    std::string error;

    bool null() override { return put(Node{}); }
    bool boolean(bool v) override {
        Node n;
        n.kind = Node::Kind::boolean;
        n.b = v;
        return put(std::move(n));
    }
    bool number_integer(number_integer_t v) override {
        Node n;
        n.kind = Node::Kind::integer;
        n.i = v;
        return put(std::move(n));
    }
    bool number_unsigned(number_unsigned_t v) override {
        Node n;
        n.kind = Node::Kind::integer;
        if (v > static_cast<number_unsigned_t>(std::numeric_limits<std::int64_t>::max()))
            n.int_overflow = true;
        else
            n.i = static_cast<std::int64_t>(v);
        return put(std::move(n));
    }
    bool number_float(number_float_t v, const string_t&) override {
        Node n;
        n.kind = Node::Kind::floating;
        n.d = v;
        return put(std::move(n));
    }
    bool string(string_t& v) override {
        Node n;
        n.kind = Node::Kind::string;
        n.s = std::move(v);
        return put(std::move(n));
    }
    bool binary(binary_t&) override { return false; }
    bool start_object(std::size_t) override {
        Node n;
        n.kind = Node::Kind::object;
        stack_.push_back(std::move(n));
        return true;
    }
    bool key(string_t& k) override {
        pending_keys_.push_back(std::move(k));
        return true;
    }
    bool end_object() override { return finish(); }
    bool start_array(std::size_t) override {
        Node n;
        n.kind = Node::Kind::array;
        stack_.push_back(std::move(n));
        return true;
    }
    bool end_array() override { return finish(); }
    bool parse_error(std::size_t, const std::string&,
                     const nlohmann::detail::exception& ex) override {
        error = ex.what();
        return false;
    }

private:
    std::vector<Node> stack_;
    std::vector<std::string> pending_keys_;

    bool put(Node n) {
        if (stack_.empty()) {
            root = std::move(n);
            return true;
        }
        Node& parent = stack_.back();
        if (parent.kind == Node::Kind::object) {
            parent.members.emplace_back(std::move(pending_keys_.back()), std::move(n));
            pending_keys_.pop_back();
        } else {
            parent.items.push_back(std::move(n));
        }
        return true;
    }

    bool finish() {
        Node n = std::move(stack_.back());
        stack_.pop_back();
        return put(std::move(n));
    }
};

/// Drops commas that directly precede a closing bracket, outside strings.
// Drops trailing commas and closes brackets left open at the end of input.
std::string lax_repair(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    std::string open;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            out.push_back(c);
            if (c == '\\' && i + 1 < text.size())
                out.push_back(text[++i]);
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            open.push_back(c == '{' ? '}' : ']');
        } else if (c == '}' || c == ']') {
            if (!open.empty() && open.back() == c)
                open.pop_back();
        } else if (c == ',') {
            std::size_t j = i + 1;
            while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j])))
                ++j;
            if (j < text.size() && (text[j] == '}' || text[j] == ']'))
                continue;
        }
        out.push_back(c);
    }
    if (!in_string)
        out.append(open.rbegin(), open.rend());
    return out;
}

class Walker {
public:
    explicit Walker(ParseOptions opts) : opts_(opts) {}

    std::vector<Violation> violations;

    EaseyConfig walk_root(Node& root) {
        EaseyConfig cfg;
        if (root.kind != Node::Kind::object) {
            add(ViolationCode::TYPE_MISMATCH, "", "document must be an object");
            return cfg;
        }
        if (opts_.lax)
            hoist_nested_sections(root);
        check_duplicates(root, "");

        bool have_job = false, have_deployment = false, have_execution = false;
        for (auto& [key, value] : root.members) {
            if (key == "job") {
                have_job = true;
                cfg.job = walk_job(value);
            } else if (key == "data") {
                cfg.data = walk_data(value);
            } else if (key == "deployment") {
                have_deployment = true;
                cfg.deployment = walk_deployment(value);
            } else if (key == "execution") {
                have_execution = true;
                cfg.execution = walk_execution(value);
            } else {
                add(ViolationCode::UNKNOWN_KEY, "/" + key, "unknown top-level key '" + key + "'");
            }
        }
        if (!have_job)
            add(ViolationCode::SECTION_MISSING, "/job", "missing mandatory section 'job'");
        if (!have_deployment)
            add(ViolationCode::SECTION_MISSING, "/deployment",
                "missing mandatory section 'deployment'");
        if (!have_execution)
            add(ViolationCode::SECTION_MISSING, "/execution",
                "missing mandatory section 'execution'");
        return cfg;
    }

private:
    ParseOptions opts_;

    void add(ViolationCode code, std::string path, std::string message) {
        violations.push_back({code, std::move(path), std::move(message)});
    }

    // Historical documents nest the other sections inside "job".
    static void hoist_nested_sections(Node& root) {
        auto job = std::find_if(root.members.begin(), root.members.end(),
                                [](const auto& m) { return m.first == "job"; });
        if (job == root.members.end() || job->second.kind != Node::Kind::object)
            return;
        std::vector<std::pair<std::string, Node>> hoisted;
        auto& jm = job->second.members;
        for (auto it = jm.begin(); it != jm.end();) {
            if (it->first == "data" || it->first == "deployment" || it->first == "execution") {
                hoisted.push_back(std::move(*it));
                it = jm.erase(it);
            } else {
                ++it;
            }
        }
        for (auto& m : hoisted)
            root.members.push_back(std::move(m));
    }

    void check_duplicates(Node& node, const std::string& path) {
        if (node.kind == Node::Kind::array) {
            for (std::size_t i = 0; i < node.items.size(); ++i)
                check_duplicates(node.items[i], path + "/" + std::to_string(i));
            return;
        }
        if (node.kind != Node::Kind::object)
            return;
        bool lax_execution = opts_.lax && path == "/execution";
        for (std::size_t i = 0; i < node.members.size(); ++i) {
            const auto& key = node.members[i].first;
            if (!lax_execution) {
                for (std::size_t j = 0; j < i; ++j) {
                    if (node.members[j].first == key) {
                        add(ViolationCode::DUPLICATE_KEY, path + "/" + key,
                            "repeated key '" + key + "'");
                        break;
                    }
                }
            }
            check_duplicates(node.members[i].second, path + "/" + key);
        }
    }

    bool expect(const Node& n, Node::Kind kind, const std::string& path, const char* what) {
        if (n.kind == kind)
            return true;
        add(ViolationCode::TYPE_MISMATCH, path,
            std::string("expected ") + what + ", found " + n.kind_name());
        return false;
    }

    std::optional<std::string> string_field(const Node& n, const std::string& path) {
        if (!expect(n, Node::Kind::string, path, "string"))
            return std::nullopt;
        return n.s;
    }

    // Integers may be written as JSON numbers or as decimal strings.
    std::optional<std::int64_t> integer_field(const Node& n, const std::string& path) {
        if (n.kind == Node::Kind::integer) {
            if (n.int_overflow) {
                add(ViolationCode::INTEGER_INVALID, path, "integer out of range");
                return std::nullopt;
            }
            return n.i;
        }
        if (n.kind == Node::Kind::floating) {
            add(ViolationCode::INTEGER_INVALID, path, "expected an integer, found a fraction");
            return std::nullopt;
        }
        if (n.kind == Node::Kind::string) {
            std::int64_t v = 0;
            const char* b = n.s.data();
            const char* e = b + n.s.size();
            auto [p, ec] = std::from_chars(b, e, v);
            if (n.s.empty() || ec != std::errc{} || p != e) {
                add(ViolationCode::INTEGER_INVALID, path, "'" + n.s + "' is not an integer");
                return std::nullopt;
            }
            return v;
        }
        expect(n, Node::Kind::integer, path, "integer");
        return std::nullopt;
    }

    template <class Fn>
    void for_members(Node& obj, const std::string& path,
                     std::initializer_list<std::string_view> allowed, Fn&& fn) {
        for (auto& [key, value] : obj.members) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                add(ViolationCode::UNKNOWN_KEY, path + "/" + key, "unknown key '" + key + "'");
                continue;
            }
            fn(key, value, path + "/" + key);
        }
    }

    JobMeta walk_job(Node& n) {
        JobMeta job;
        if (!expect(n, Node::Kind::object, "/job", "object"))
            return job;
        bool have_name = false;
        for_members(n, "/job", {"name", "id", "mail"},
                    [&](const std::string& key, Node& v, const std::string& path) {
                        if (key == "name") {
                            have_name = true;
                            job.name = string_field(v, path).value_or("");
                        } else if (key == "mail") {
                            if (v.kind != Node::Kind::null)
                                job.mail = string_field(v, path).value_or("");
                        } else if (v.kind != Node::Kind::null) {
                            string_field(v, path); // id: type-checked, then ignored
                        }
                    });
        if (!have_name)
            add(ViolationCode::FIELD_MISSING, "/job/name", "missing 'name'");
        return job;
    }

    TransferEndpoint walk_endpoint(Node& n, const std::string& path, const char* location_key) {
        TransferEndpoint ep;
        if (!expect(n, Node::Kind::object, path, "object"))
            return ep;
        bool have_location = false, have_protocol = false;
        for_members(n, path, {location_key, "protocol", "user", "auth"},
                    [&](const std::string& key, Node& v, const std::string& p) {
                        if (key == location_key) {
                            have_location = true;
                            ep.location = string_field(v, p).value_or("");
                        } else if (key == "protocol") {
                            have_protocol = true;
                            if (auto s = string_field(v, p)) {
                                if (auto proto = protocol_from_string(*s))
                                    ep.protocol = *proto;
                                else
                                    add(ViolationCode::PROTOCOL_UNKNOWN, p,
                                        "unknown protocol '" + *s + "'");
                            }
                        } else if (key == "user") {
                            if (v.kind != Node::Kind::null)
                                ep.user = string_field(v, p).value_or("");
                        } else if (v.kind != Node::Kind::null) {
                            ep.auth = string_field(v, p).value_or("");
                        }
                    });
        if (!have_location)
            add(ViolationCode::FIELD_MISSING, path + "/" + location_key,
                std::string("missing '") + location_key + "'");
        if (!have_protocol)
            add(ViolationCode::FIELD_MISSING, path + "/protocol", "missing 'protocol'");
        return ep;
    }

    DataSpec walk_data(Node& n) {
        DataSpec data;
        if (!expect(n, Node::Kind::object, "/data", "object"))
            return data;
        bool have_mount = false;
        for_members(
            n, "/data", {"input", "output", "mount"},
            [&](const std::string& key, Node& v, const std::string& path) {
                if (key == "mount") {
                    have_mount = true;
                    if (v.kind == Node::Kind::string) {
                        data.mount = v.s;
                    } else if (expect(v, Node::Kind::object, path, "object")) {
                        bool have_path = false;
                        for_members(v, path, {"container-path"},
                                    [&](const std::string&, Node& cp, const std::string& p) {
                                        have_path = true;
                                        data.mount = string_field(cp, p).value_or("");
                                    });
                        if (!have_path)
                            add(ViolationCode::FIELD_MISSING, path + "/container-path",
                                "missing 'container-path'");
                    }
                    return;
                }
                if (!expect(v, Node::Kind::array, path, "array"))
                    return;
                auto& list = key == "input" ? data.input : data.output;
                const char* loc = key == "input" ? "source" : "destination";
                for (std::size_t i = 0; i < v.items.size(); ++i)
                    list.push_back(walk_endpoint(v.items[i], path + "/" + std::to_string(i), loc));
            });
        if (!have_mount)
            add(ViolationCode::FIELD_MISSING, "/data/mount", "missing 'mount'");
        return data;
    }

    std::optional<std::int64_t> ram_field(const Node& n, const std::string& path) {
        if (n.kind == Node::Kind::null)
            return std::nullopt;
        if (n.kind == Node::Kind::string) {
            std::string_view s = n.s;
            if (s.empty())
                return std::nullopt;
            std::int64_t scale = 1;
            char suffix = s.back();
            if (suffix == 'M' || suffix == 'm') {
                s.remove_suffix(1);
            } else if (suffix == 'G' || suffix == 'g') {
                scale = 1024;
                s.remove_suffix(1);
            }
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (s.empty() || ec != std::errc{} || p != s.data() + s.size() ||
                v > std::numeric_limits<std::int64_t>::max() / scale) {
                add(ViolationCode::RAM_INVALID, path,
                    "'" + n.s + "' is not a memory amount (integer MB or suffix M/G)");
                return std::nullopt;
            }
            return v * scale;
        }
        if (n.kind == Node::Kind::integer && !n.int_overflow)
            return n.i;
        if (n.kind == Node::Kind::integer || n.kind == Node::Kind::floating) {
            add(ViolationCode::RAM_INVALID, path, "memory amount must be an integer");
            return std::nullopt;
        }
        expect(n, Node::Kind::string, path, "memory amount");
        return std::nullopt;
    }

    DeploymentSpec walk_deployment(Node& n) {
        DeploymentSpec dep;
        if (!expect(n, Node::Kind::object, "/deployment", "object"))
            return dep;
        bool have_nodes = false, have_cpt = false, have_tpn = false, have_clock = false;
        for_members(
            n, "/deployment", {"nodes", "ram", "cores-per-task", "tasks-per-node", "clocktime"},
            [&](const std::string& key, Node& v, const std::string& path) {
                if (key == "nodes") {
                    have_nodes = true;
                    dep.nodes = integer_field(v, path).value_or(1);
                } else if (key == "cores-per-task") {
                    have_cpt = true;
                    dep.cores_per_task = integer_field(v, path).value_or(1);
                } else if (key == "tasks-per-node") {
                    have_tpn = true;
                    dep.tasks_per_node = integer_field(v, path).value_or(1);
                } else if (key == "ram") {
                    dep.ram_mb = ram_field(v, path);
                } else {
                    have_clock = true;
                    if (auto s = string_field(v, path)) {
                        if (auto t = Clocktime::parse(*s))
                            dep.clocktime = *t;
                        else
                            add(ViolationCode::CLOCKTIME_INVALID, path,
                                "'" + *s + "' is not HH:MM:SS");
                    }
                }
            });
        if (!have_nodes)
            add(ViolationCode::FIELD_MISSING, "/deployment/nodes", "missing 'nodes'");
        if (!have_cpt)
            add(ViolationCode::FIELD_MISSING, "/deployment/cores-per-task",
                "missing 'cores-per-task'");
        if (!have_tpn)
            add(ViolationCode::FIELD_MISSING, "/deployment/tasks-per-node",
                "missing 'tasks-per-node'");
        if (!have_clock)
            add(ViolationCode::FIELD_MISSING, "/deployment/clocktime", "missing 'clocktime'");
        return dep;
    }

    std::optional<ExecutionStep> walk_step(Node& n, const std::string& path) {
        if (!expect(n, Node::Kind::object, path, "object"))
            return std::nullopt;
        if (n.members.size() != 1 ||
            (n.members[0].first != "serial" && n.members[0].first != "mpi")) {
            add(ViolationCode::STEP_KIND_INVALID, path,
                "a step holds exactly one of 'serial' or 'mpi'");
            return std::nullopt;
        }
        auto& [kind, body] = n.members[0];
        std::string bpath = path + "/" + kind;
        if (!expect(body, Node::Kind::object, bpath, "object"))
            return std::nullopt;
        std::string command;
        bool have_command = false, have_tasks = false;
        std::int64_t tasks = 1;
        if (kind == "serial") {
            for_members(body, bpath, {"command"},
                        [&](const std::string&, Node& v, const std::string& p) {
                            have_command = true;
                            command = string_field(v, p).value_or("");
                        });
        } else {
            for_members(body, bpath, {"command", "mpi-tasks"},
                        [&](const std::string& key, Node& v, const std::string& p) {
                            if (key == "command") {
                                have_command = true;
                                command = string_field(v, p).value_or("");
                            } else {
                                have_tasks = true;
                                tasks = integer_field(v, p).value_or(1);
                            }
                        });
            if (!have_tasks)
                add(ViolationCode::FIELD_MISSING, bpath + "/mpi-tasks", "missing 'mpi-tasks'");
        }
        if (!have_command)
            add(ViolationCode::FIELD_MISSING, bpath + "/command", "missing 'command'");
        if (kind == "serial")
            return SerialStep{std::move(command)};
        return MpiStep{std::move(command), tasks};
    }

    ExecutionSpec walk_execution(Node& n) {
        ExecutionSpec exec;
        if (opts_.lax && n.kind == Node::Kind::object) {
            // {"serial":{..},"mpi":{..},"serial":{..}} -> [{"serial":..},...]
            Node arr;
            arr.kind = Node::Kind::array;
            for (auto& m : n.members) {
                Node item;
                item.kind = Node::Kind::object;
                item.members.push_back(std::move(m));
                arr.items.push_back(std::move(item));
            }
            n = std::move(arr);
        }
        if (!expect(n, Node::Kind::array, "/execution", "array"))
            return exec;
        for (std::size_t i = 0; i < n.items.size(); ++i) {
            if (auto step = walk_step(n.items[i], "/execution/" + std::to_string(i)))
                exec.steps.push_back(std::move(*step));
        }
        return exec;
    }
};

bool mail_shaped(std::string_view mail) {
    auto at = mail.find('@');
    if (at == std::string_view::npos || at == 0 || mail.find('@', at + 1) != std::string_view::npos)
        return false;
    auto domain = mail.substr(at + 1);
    auto dot = domain.find('.');
    if (dot == std::string_view::npos || dot == 0 || domain.back() == '.')
        return false;
    return std::none_of(mail.begin(), mail.end(),
                        [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

/// Range and content checks on an already typed config.
std::vector<Violation> check_values(const EaseyConfig& cfg) {
    std::vector<Violation> out;
    auto add = [&](ViolationCode code, std::string path, std::string msg) {
        out.push_back({code, std::move(path), std::move(msg)});
    };
    if (cfg.job.name.empty())
        add(ViolationCode::NAME_EMPTY, "/job/name", "job name must not be empty");
    if (!cfg.job.mail.empty() && !mail_shaped(cfg.job.mail))
        add(ViolationCode::MAIL_INVALID, "/job/mail", "'" + cfg.job.mail + "' is not a mail address");

    if (cfg.data) {
        const auto& d = *cfg.data;
        auto check_list = [&](const std::vector<TransferEndpoint>& list, const char* name) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (list[i].location.empty())
                    add(ViolationCode::LOCATION_EMPTY,
                        std::string("/data/") + name + "/" + std::to_string(i),
                        "transfer location must not be empty");
            }
        };
        check_list(d.input, "input");
        check_list(d.output, "output");
        if (d.mount.empty() || d.mount.front() != '/')
            add(ViolationCode::MOUNT_NOT_ABSOLUTE, "/data/mount",
                "mount path '" + d.mount + "' must be absolute");
    }

    const auto& dep = cfg.deployment;
    if (dep.nodes <= 0)
        add(ViolationCode::NODES_NONPOSITIVE, "/deployment/nodes", "nodes must be positive");
    if (dep.cores_per_task <= 0)
        add(ViolationCode::CORES_PER_TASK_NONPOSITIVE, "/deployment/cores-per-task",
            "cores-per-task must be positive");
    if (dep.tasks_per_node <= 0)
        add(ViolationCode::TASKS_PER_NODE_NONPOSITIVE, "/deployment/tasks-per-node",
            "tasks-per-node must be positive");
    if (dep.ram_mb && *dep.ram_mb <= 0)
        add(ViolationCode::RAM_INVALID, "/deployment/ram", "ram must be positive when set");
    const auto& t = dep.clocktime;
    if (t.hours < 0 || t.minutes < 0 || t.minutes >= 60 || t.seconds < 0 || t.seconds >= 60)
        add(ViolationCode::CLOCKTIME_INVALID, "/deployment/clocktime", "clocktime out of range");

    if (cfg.execution.steps.empty())
        add(ViolationCode::EXECUTION_EMPTY, "/execution", "at least one step is required");
    for (std::size_t i = 0; i < cfg.execution.steps.size(); ++i) {
        std::string path = "/execution/" + std::to_string(i);
        std::visit(
            [&](const auto& step) {
                if (step.command.empty())
                    add(ViolationCode::COMMAND_EMPTY, path, "command must not be empty");
                if constexpr (std::is_same_v<std::decay_t<decltype(step)>, MpiStep>) {
                    if (step.mpi_tasks <= 0)
                        add(ViolationCode::MPI_TASKS_NONPOSITIVE, path + "/mpi/mpi-tasks",
                            "mpi-tasks must be positive");
                }
            },
            cfg.execution.steps[i]);
    }
    return out;
}

} // namespace

RelaxedParse parse_config_relaxed(std::string_view text, ParseOptions opts) {
    RelaxedParse result;
    std::string owned;
    if (opts.lax) {
        owned = lax_repair(text);
        text = owned;
    }
    TreeBuilder builder;
    bool ok = false;
    try {
        ok = json::sax_parse(text.begin(), text.end(), &builder);
    } catch (const json::exception& ex) {
        builder.error = ex.what();
    }
    if (!ok) {
        result.violations.push_back({ViolationCode::SYNTAX_ERROR, "",
                                     builder.error.empty() ? "malformed document" : builder.error});
        return result;
    }
    Walker walker(opts);
    EaseyConfig cfg = walker.walk_root(builder.root);
    result.violations = std::move(walker.violations);
    if (builder.root.kind == Node::Kind::object) {
        auto values = check_values(cfg);
        result.violations.insert(result.violations.end(), values.begin(), values.end());
        result.config = std::move(cfg);
    }
    return result;
}

EaseyConfig parse_config(std::string_view text, ParseOptions opts) {
    auto parsed = parse_config_relaxed(text, opts);
    for (const auto& v : parsed.violations) {
        std::string msg = (v.path.empty() ? std::string() : v.path + ": ") + v.message;
        switch (error_class(v.code)) {
        case ErrorClass::syntax: throw SyntaxError(msg);
        case ErrorClass::schema: throw SchemaError(std::string(to_string(v.code)) + ": " + msg);
        case ErrorClass::value: throw ValueError(std::string(to_string(v.code)) + ": " + msg);
        case ErrorClass::policy: break;
        }
    }
    return std::move(*parsed.config);
}

std::string serialize_config(const EaseyConfig& cfg) {
    json doc = json::object();
    json job = {{"name", cfg.job.name}};
    if (!cfg.job.mail.empty())
        job["mail"] = cfg.job.mail;
    doc["job"] = std::move(job);

    if (cfg.data) {
        auto endpoints = [](const std::vector<TransferEndpoint>& list, const char* loc) {
            json arr = json::array();
            for (const auto& ep : list) {
                json e = {{loc, ep.location}, {"protocol", std::string(to_string(ep.protocol))}};
                if (!ep.user.empty())
                    e["user"] = ep.user;
                if (!ep.auth.empty())
                    e["auth"] = ep.auth;
                arr.push_back(std::move(e));
            }
            return arr;
        };
        doc["data"] = {{"input", endpoints(cfg.data->input, "source")},
                       {"output", endpoints(cfg.data->output, "destination")},
                       {"mount", {{"container-path", cfg.data->mount}}}};
    }

    const auto& dep = cfg.deployment;
    json d = {{"nodes", dep.nodes},
              {"cores-per-task", dep.cores_per_task},
              {"tasks-per-node", dep.tasks_per_node},
              {"clocktime", dep.clocktime.str()}};
    if (dep.ram_mb)
        d["ram"] = *dep.ram_mb;
    doc["deployment"] = std::move(d);

    json steps = json::array();
    for (const auto& step : cfg.execution.steps) {
        if (const auto* s = std::get_if<SerialStep>(&step))
            steps.push_back({{"serial", {{"command", s->command}}}});
        else {
            const auto& m = std::get<MpiStep>(step);
            steps.push_back({{"mpi", {{"command", m.command}, {"mpi-tasks", m.mpi_tasks}}}});
        }
    }
    doc["execution"] = std::move(steps);
    return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

ValidationReport validate(const EaseyConfig& cfg) {
    ValidationReport report;
    report.violations = check_values(cfg);
    if (cfg.data) {
        auto flag = [&](const std::vector<TransferEndpoint>& list, const char* name) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (list[i].protocol == Protocol::gridftp)
                    report.violations.push_back(
                        {ViolationCode::PROTOCOL_UNSUPPORTED_GRIDFTP,
                         std::string("/data/") + name + "/" + std::to_string(i) + "/protocol",
                         "gridftp transfers are not supported yet"});
            }
        };
        flag(cfg.data->input, "input");
        flag(cfg.data->output, "output");
    }

    std::int64_t widest = 0;
    for (const auto& step : cfg.execution.steps) {
        if (const auto* m = std::get_if<MpiStep>(&step))
            widest = std::max(widest, m->mpi_tasks);
    }
    const auto& dep = cfg.deployment;
    if (widest > 0 && dep.tasks_per_node > 0 && dep.nodes > 0) {
        auto needed = derive_nodes(widest, dep.tasks_per_node);
        if (needed != dep.nodes)
            report.violations.push_back(
                {ViolationCode::NODES_MISMATCH, "/deployment/nodes",
                 "nodes=" + std::to_string(dep.nodes) + " but " + std::to_string(widest) +
                     " mpi tasks at " + std::to_string(dep.tasks_per_node) +
                     " tasks per node need " + std::to_string(needed)});
    }
    return report;
}

JobId assign_job_id(const EaseyConfig& cfg, std::string_view timestamp) {
    std::string bytes = serialize_config(cfg);
    bytes.append(timestamp);
    return JobId(sha256_hex(bytes).substr(0, 16));
}

} // namespace easey
