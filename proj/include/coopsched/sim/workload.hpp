// Copyright 2026 The coopsched Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <coopsched/common.hpp>

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace coopsched::sim {

inline constexpr const char* kWorkloadSchema = "coopsched.workload/1";

enum class ObjectKind : std::uint8_t { Mutex, Condvar, Barrier, Semaphore, BusyBarrier, Flag };

inline const char* to_string(ObjectKind k) {
  switch (k) {
    case ObjectKind::Mutex: return "mutex";
    case ObjectKind::Condvar: return "condvar";
    case ObjectKind::Barrier: return "barrier";
    case ObjectKind::Semaphore: return "semaphore";
    case ObjectKind::BusyBarrier: return "busy_barrier";
    case ObjectKind::Flag: return "flag";
  }
  return "?";
}

struct ObjectDecl {
  ObjectKind kind = ObjectKind::Mutex;
  // Barrier parties or initial semaphore permits.
  std::uint64_t count = 0;
  std::optional<std::uint32_t> yield_every;

  bool operator==(const ObjectDecl&) const = default;
};

// Reference to a synchronization object. Global objects are shared by the
// whole workload; local ones live in the scope of the task's program
// instance (see Program::locals).
struct ObjRef {
  bool local = false;
  std::uint32_t index = 0;

  bool operator==(const ObjRef&) const = default;
  auto operator<=>(const ObjRef&) const = default;
};

enum class Op : std::uint8_t {
  Compute,
  Lock,
  Unlock,
  CvWait,
  CvSignal,
  CvBroadcast,
  BarrierWait,
  BusySpin,
  SemWait,
  SemPost,
  Yield,
  TimedWait,
  Notify,
  Spawn,
  Join,
  JoinAll,
  Finish,
};

struct Segment {
  Op op = Op::Finish;
  // Compute duration or timed-wait timeout.
  Nanos duration{0};
  ObjRef obj;
  // CvWait: the associated mutex. TimedWait: the flag probed, if any.
  std::optional<ObjRef> obj2;
  // Spawn: program index and optional target domain.
  std::uint32_t program = 0;
  std::optional<std::uint32_t> domain;
  // Join: index of the child among this task's spawns, in spawn order.
  std::uint32_t child = 0;

  bool operator==(const Segment&) const = default;

  static Segment of(Op op, Nanos d = Nanos::zero()) {
    Segment s;
    s.op = op;
    s.duration = d;
    return s;
  }
  static Segment compute(Nanos d) { return of(Op::Compute, d); }
  static Segment with_obj(Op op, ObjRef r) {
    Segment s;
    s.op = op;
    s.obj = r;
    return s;
  }
  static Segment lock(ObjRef m) { return with_obj(Op::Lock, m); }
  static Segment unlock(ObjRef m) { return with_obj(Op::Unlock, m); }
  static Segment cv_wait(ObjRef cv, ObjRef m) {
    auto s = with_obj(Op::CvWait, cv);
    s.obj2 = m;
    return s;
  }
  static Segment cv_signal(ObjRef cv) { return with_obj(Op::CvSignal, cv); }
  static Segment cv_broadcast(ObjRef cv) { return with_obj(Op::CvBroadcast, cv); }
  static Segment barrier(ObjRef b) { return with_obj(Op::BarrierWait, b); }
  static Segment busy_spin(ObjRef b) { return with_obj(Op::BusySpin, b); }
  static Segment sem_wait(ObjRef s) { return with_obj(Op::SemWait, s); }
  static Segment sem_post(ObjRef s) { return with_obj(Op::SemPost, s); }
  static Segment yield() { return of(Op::Yield); }
  static Segment timed_wait(Nanos timeout, std::optional<ObjRef> flag = std::nullopt) {
    auto s = of(Op::TimedWait, timeout);
    s.obj2 = flag;
    return s;
  }
  static Segment notify(ObjRef flag) { return with_obj(Op::Notify, flag); }
  static Segment spawn(std::uint32_t program, std::optional<std::uint32_t> domain = std::nullopt) {
    auto s = of(Op::Spawn);
    s.program = program;
    s.domain = domain;
    return s;
  }
  static Segment join(std::uint32_t child) {
    auto s = of(Op::Join);
    s.child = child;
    return s;
  }
  static Segment join_all() { return of(Op::JoinAll); }
  static Segment finish() { return of(Op::Finish); }
};

inline ObjRef global(std::uint32_t i) { return {false, i}; }
inline ObjRef local(std::uint32_t i) { return {true, i}; }

struct Program {
  std::string name;
  // When non-empty, every task running this program gets fresh instances of
  // these objects. Otherwise the task shares the scope of its spawner.
  std::vector<ObjectDecl> locals;
  std::vector<Segment> segments;

  bool operator==(const Program&) const = default;
};

struct DomainDecl {
  std::string name;
  // Share weight under FAIR. The cooperative policy ignores it.
  double weight = 1.0;
  std::optional<Nanos> shutdown_at;
  Nanos shutdown_grace{100'000'000};

  bool operator==(const DomainDecl&) const = default;
};

// A top-level task. It is created at `arrival` once every task listed in
// `after` has finished.
struct TaskDecl {
  std::uint32_t program = 0;
  std::uint32_t domain = 0;
  Nanos arrival{0};
  std::vector<std::uint32_t> after;
  // Latency from arrival to finish is recorded for request tasks.
  bool request = false;
  // Runs on a pre-existing context; not counted as a created worker.
  bool attached = false;
  std::optional<double> weight;

  bool operator==(const TaskDecl&) const = default;
};

struct Workload {
  std::string name;
  std::vector<DomainDecl> domains;
  std::vector<ObjectDecl> objects;
  std::vector<Program> programs;
  std::vector<TaskDecl> tasks;

  bool operator==(const Workload&) const = default;

  std::uint32_t add_domain(std::string n, double weight = 1.0) {
    DomainDecl d;
    d.name = std::move(n);
    d.weight = weight;
    domains.push_back(std::move(d));
    return static_cast<std::uint32_t>(domains.size() - 1);
  }
  ObjRef add_object(ObjectKind k, std::uint64_t count = 0,
                    std::optional<std::uint32_t> yield_every = std::nullopt) {
    objects.push_back({k, count, yield_every});
    return global(static_cast<std::uint32_t>(objects.size() - 1));
  }
  std::uint32_t add_program(Program p) {
    programs.push_back(std::move(p));
    return static_cast<std::uint32_t>(programs.size() - 1);
  }
  std::uint32_t add_task(TaskDecl t) {
    tasks.push_back(std::move(t));
    return static_cast<std::uint32_t>(tasks.size() - 1);
  }

  void validate() const;
};

inline ObjectKind required_kind(Op op, bool second = false) {
  switch (op) {
    case Op::Lock:
    case Op::Unlock: return ObjectKind::Mutex;
    case Op::CvWait: return second ? ObjectKind::Mutex : ObjectKind::Condvar;
    case Op::CvSignal:
    case Op::CvBroadcast: return ObjectKind::Condvar;
    case Op::BarrierWait: return ObjectKind::Barrier;
    case Op::BusySpin: return ObjectKind::BusyBarrier;
    case Op::SemWait:
    case Op::SemPost: return ObjectKind::Semaphore;
    case Op::TimedWait:
    case Op::Notify: return ObjectKind::Flag;
    default: break;
  }
  throw ContractViolation("operation takes no object");
}

inline bool takes_object(Op op) {
  switch (op) {
    case Op::Lock:
    case Op::Unlock:
    case Op::CvWait:
    case Op::CvSignal:
    case Op::CvBroadcast:
    case Op::BarrierWait:
    case Op::BusySpin:
    case Op::SemWait:
    case Op::SemPost:
    case Op::Notify: return true;
    default: return false;
  }
}

namespace detail {

inline void check_decl(const ObjectDecl& d, const std::string& where) {
  if ((d.kind == ObjectKind::Barrier || d.kind == ObjectKind::BusyBarrier) && d.count == 0)
    throw Error(where + ".parties: must be >= 1");
  if (d.yield_every && (d.kind != ObjectKind::BusyBarrier || *d.yield_every == 0))
    throw Error(where + ".yield_every: only valid (and > 0) on busy_barrier");
}

}  // namespace detail

inline void Workload::validate() const {
  if (domains.empty() && !tasks.empty()) throw Error("domains: at least one domain required");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const auto& d = domains[i];
    std::string where = "domains[" + std::to_string(i) + "]";
    if (!(d.weight > 0)) throw Error(where + ".weight: must be > 0");
    if (d.shutdown_at && *d.shutdown_at < Nanos::zero())
      throw Error(where + ".shutdown_at_ns: must be >= 0");
    if (d.shutdown_grace < Nanos::zero()) throw Error(where + ".shutdown_grace_ns: must be >= 0");
  }
  for (std::size_t i = 0; i < objects.size(); ++i)
    detail::check_decl(objects[i], "objects[" + std::to_string(i) + "]");

  auto check_ref = [&](const ObjRef& r, ObjectKind want, const Program& p,
                       const std::string& where) {
    if (r.local) {
      // Programs without locals inherit their spawner's scope; that can only
      // be checked while running.
      if (p.locals.empty()) return;
      if (r.index >= p.locals.size()) throw Error(where + ": local object out of range");
      if (p.locals[r.index].kind != want)
        throw Error(where + ": expected a " + to_string(want) + ", local object is a " +
                    to_string(p.locals[r.index].kind));
      return;
    }
    if (r.index >= objects.size()) throw Error(where + ": object out of range");
    if (objects[r.index].kind != want)
      throw Error(where + ": expected a " + to_string(want) + ", object is a " +
                  to_string(objects[r.index].kind));
  };

  std::set<std::string> names;
  for (std::size_t pi = 0; pi < programs.size(); ++pi) {
    const auto& p = programs[pi];
    std::string pw = "programs[" + std::to_string(pi) + "]";
    if (!p.name.empty() && !names.insert(p.name).second)
      throw Error(pw + ".name: duplicate program name '" + p.name + "'");
    for (std::size_t li = 0; li < p.locals.size(); ++li)
      detail::check_decl(p.locals[li], pw + ".locals[" + std::to_string(li) + "]");
    if (p.segments.empty() || p.segments.back().op != Op::Finish)
      throw Error(pw + ".segments: must end with finish");
    std::uint32_t spawns = 0;
    for (std::size_t si = 0; si < p.segments.size(); ++si) {
      const auto& s = p.segments[si];
      std::string where = pw + ".segments[" + std::to_string(si) + "]";
      if (s.op == Op::Finish && si + 1 != p.segments.size())
        throw Error(where + ": finish must be the last segment");
      if (takes_object(s.op)) check_ref(s.obj, required_kind(s.op), p, where);
      switch (s.op) {
        case Op::Compute:
          if (s.duration < Nanos::zero()) throw Error(where + ".ns: must be >= 0");
          break;
        case Op::CvWait:
          if (!s.obj2) throw Error(where + ".mutex: required");
          check_ref(*s.obj2, ObjectKind::Mutex, p, where + ".mutex");
          break;
        case Op::TimedWait:
          if (s.duration < Nanos::zero()) throw Error(where + ".ns: must be >= 0");
          if (s.obj2) check_ref(*s.obj2, ObjectKind::Flag, p, where + ".flag");
          break;
        case Op::Spawn:
          if (s.program >= programs.size()) throw Error(where + ".program: out of range");
          if (s.domain && *s.domain >= domains.size())
            throw Error(where + ".domain: out of range");
          ++spawns;
          break;
        case Op::Join:
          if (s.child >= spawns) throw Error(where + ".child: no such earlier spawn");
          break;
        default: break;
      }
    }
  }
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const auto& t = tasks[ti];
    std::string where = "tasks[" + std::to_string(ti) + "]";
    if (t.program >= programs.size()) throw Error(where + ".program: out of range");
    if (t.domain >= domains.size()) throw Error(where + ".domain: out of range");
    if (t.arrival < Nanos::zero()) throw Error(where + ".arrival_ns: must be >= 0");
    if (t.weight && !(*t.weight > 0)) throw Error(where + ".weight: must be > 0");
    for (auto a : t.after)
      if (a >= ti) throw Error(where + ".after: must name an earlier task");
  }
}

// JSON -------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

inline const char* to_string(Op op) {
  switch (op) {
    case Op::Compute: return "compute";
    case Op::Lock: return "lock";
    case Op::Unlock: return "unlock";
    case Op::CvWait: return "cv_wait";
    case Op::CvSignal: return "cv_signal";
    case Op::CvBroadcast: return "cv_broadcast";
    case Op::BarrierWait: return "barrier";
    case Op::BusySpin: return "busy_spin";
    case Op::SemWait: return "sem_wait";
    case Op::SemPost: return "sem_post";
    case Op::Yield: return "yield";
    case Op::TimedWait: return "timed_wait";
    case Op::Notify: return "notify";
    case Op::Spawn: return "spawn";
    case Op::Join: return "join";
    case Op::JoinAll: return "join_all";
    case Op::Finish: return "finish";
  }
  return "?";
}

namespace detail {

inline Json program_ref_json(const Workload& w, std::uint32_t idx) {
  const auto& name = w.programs.at(idx).name;
  if (name.empty()) return idx;
  return name;
}

// Rejects keys outside `allowed`, naming the first offending path.
inline void only_keys(const Json& j, const std::string& where,
                      std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw Error(where + "." + it.key() + ": unknown key");
  }
}

template <class T>
T get_as(const Json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(where + ": wrong type");
  }
}

inline std::string ref_token(const ObjRef& r) {
  return (r.local ? "l" : "g") + std::to_string(r.index);
}

// Object references are written "g<N>" (global) or "l<N>" (program local);
// a bare integer means a global object.
inline ObjRef parse_ref(const Json& j, const std::string& where) {
  if (j.is_number_unsigned()) return global(j.get<std::uint32_t>());
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.size() >= 2 && (s[0] == 'g' || s[0] == 'l')) {
      std::uint32_t v = 0;
      bool digits = true;
      for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') digits = false;
        else v = v * 10 + static_cast<std::uint32_t>(s[i] - '0');
      }
      if (digits) return {s[0] == 'l', v};
    }
  }
  throw Error(where + ": expected an object reference like \"g0\" or \"l1\"");
}

inline Json decl_to_json(const ObjectDecl& d) {
  Json j;
  j["kind"] = to_string(d.kind);
  if (d.kind == ObjectKind::Barrier || d.kind == ObjectKind::BusyBarrier) j["parties"] = d.count;
  if (d.kind == ObjectKind::Semaphore) j["permits"] = d.count;
  if (d.yield_every) j["yield_every"] = *d.yield_every;
  return j;
}

inline ObjectDecl decl_from_json(const Json& j, const std::string& where) {
  only_keys(j, where, {"kind", "parties", "permits", "yield_every"});
  if (!j.contains("kind")) throw Error(where + ".kind: required");
  auto k = get_as<std::string>(j["kind"], where + ".kind");
  ObjectDecl d;
  static const std::map<std::string, ObjectKind> kinds = {
      {"mutex", ObjectKind::Mutex},         {"condvar", ObjectKind::Condvar},
      {"barrier", ObjectKind::Barrier},     {"semaphore", ObjectKind::Semaphore},
      {"busy_barrier", ObjectKind::BusyBarrier}, {"flag", ObjectKind::Flag}};
  auto it = kinds.find(k);
  if (it == kinds.end()) throw Error(where + ".kind: unknown object kind '" + k + "'");
  d.kind = it->second;
  bool barrier = d.kind == ObjectKind::Barrier || d.kind == ObjectKind::BusyBarrier;
  if (j.contains("parties")) {
    if (!barrier) throw Error(where + ".parties: only valid on barriers");
    d.count = get_as<std::uint64_t>(j["parties"], where + ".parties");
  } else if (barrier) {
    throw Error(where + ".parties: required");
  }
  if (j.contains("permits")) {
    if (d.kind != ObjectKind::Semaphore) throw Error(where + ".permits: only valid on semaphores");
    d.count = get_as<std::uint64_t>(j["permits"], where + ".permits");
  }
  if (j.contains("yield_every"))
    d.yield_every = get_as<std::uint32_t>(j["yield_every"], where + ".yield_every");
  return d;
}

}  // namespace detail

inline Json to_json(const Workload& w) {
  Json j;
  j["schema"] = kWorkloadSchema;
  j["name"] = w.name;
  j["domains"] = Json::array();
  for (const auto& d : w.domains) {
    Json dj;
    dj["name"] = d.name;
    dj["weight"] = d.weight;
    if (d.shutdown_at) {
      dj["shutdown_at_ns"] = d.shutdown_at->count();
      dj["shutdown_grace_ns"] = d.shutdown_grace.count();
    }
    j["domains"].push_back(dj);
  }
  j["objects"] = Json::array();
  for (const auto& o : w.objects) j["objects"].push_back(detail::decl_to_json(o));
  j["programs"] = Json::array();
  for (const auto& p : w.programs) {
    Json pj;
    pj["name"] = p.name;
    if (!p.locals.empty()) {
      pj["locals"] = Json::array();
      for (const auto& o : p.locals) pj["locals"].push_back(detail::decl_to_json(o));
    }
    pj["segments"] = Json::array();
    for (const auto& s : p.segments) {
      Json sj;
      sj["op"] = to_string(s.op);
      switch (s.op) {
        case Op::Compute: sj["ns"] = s.duration.count(); break;
        case Op::CvWait:
          sj["obj"] = detail::ref_token(s.obj);
          sj["mutex"] = detail::ref_token(*s.obj2);
          break;
        case Op::TimedWait:
          sj["ns"] = s.duration.count();
          if (s.obj2) sj["flag"] = detail::ref_token(*s.obj2);
          break;
        case Op::Spawn:
          sj["program"] = detail::program_ref_json(w, s.program);
          if (s.domain) sj["domain"] = *s.domain;
          break;
        case Op::Join: sj["child"] = s.child; break;
        default:
          if (takes_object(s.op)) sj["obj"] = detail::ref_token(s.obj);
          break;
      }
      pj["segments"].push_back(sj);
    }
    j["programs"].push_back(pj);
  }
  j["tasks"] = Json::array();
  for (const auto& t : w.tasks) {
    Json tj;
    tj["program"] = detail::program_ref_json(w, t.program);
    tj["domain"] = t.domain;
    if (t.arrival.count() != 0) tj["arrival_ns"] = t.arrival.count();
    if (!t.after.empty()) tj["after"] = t.after;
    if (t.request) tj["request"] = true;
    if (t.attached) tj["attached"] = true;
    if (t.weight) tj["weight"] = *t.weight;
    j["tasks"].push_back(tj);
  }
  return j;
}

inline Workload workload_from_json(const Json& j) {
  using detail::get_as;
  detail::only_keys(j, "workload", {"schema", "name", "domains", "objects", "programs", "tasks"});
  if (!j.contains("schema")) throw Error("workload.schema: required");
  auto schema = get_as<std::string>(j["schema"], "workload.schema");
  if (schema != kWorkloadSchema)
    throw Error("workload.schema: unsupported '" + schema + "', expected " + kWorkloadSchema);
  Workload w;
  if (j.contains("name")) w.name = get_as<std::string>(j["name"], "workload.name");

  auto array_of = [&](const char* key) -> const Json& {
    static const Json empty = Json::array();
    if (!j.contains(key)) return empty;
    if (!j[key].is_array()) throw Error(std::string("workload.") + key + ": expected an array");
    return j[key];
  };

  const auto& domains = array_of("domains");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    std::string where = "domains[" + std::to_string(i) + "]";
    const auto& dj = domains[i];
    detail::only_keys(dj, where, {"name", "weight", "shutdown_at_ns", "shutdown_grace_ns"});
    DomainDecl d;
    if (dj.contains("name")) d.name = get_as<std::string>(dj["name"], where + ".name");
    if (dj.contains("weight")) d.weight = get_as<double>(dj["weight"], where + ".weight");
    if (dj.contains("shutdown_at_ns"))
      d.shutdown_at = Nanos(get_as<std::int64_t>(dj["shutdown_at_ns"], where + ".shutdown_at_ns"));
    if (dj.contains("shutdown_grace_ns"))
      d.shutdown_grace =
          Nanos(get_as<std::int64_t>(dj["shutdown_grace_ns"], where + ".shutdown_grace_ns"));
    w.domains.push_back(d);
  }
  const auto& objects = array_of("objects");
  for (std::size_t i = 0; i < objects.size(); ++i)
    w.objects.push_back(detail::decl_from_json(objects[i], "objects[" + std::to_string(i) + "]"));

  const auto& programs = array_of("programs");
  std::map<std::string, std::uint32_t> by_name;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    const auto& pj = programs[i];
    std::string where = "programs[" + std::to_string(i) + "]";
    if (pj.is_object() && pj.contains("name") && pj["name"].is_string())
      by_name.emplace(pj["name"].get<std::string>(), static_cast<std::uint32_t>(i));
  }
  auto program_ref = [&](const Json& v, const std::string& where) -> std::uint32_t {
    if (v.is_number_unsigned()) return v.get<std::uint32_t>();
    if (v.is_string()) {
      auto it = by_name.find(v.get<std::string>());
      if (it == by_name.end())
        throw Error(where + ": unknown program '" + v.get<std::string>() + "'");
      return it->second;
    }
    throw Error(where + ": expected a program name or index");
  };

  static const std::map<std::string, Op> ops = {
      {"compute", Op::Compute},         {"lock", Op::Lock},
      {"unlock", Op::Unlock},           {"cv_wait", Op::CvWait},
      {"cv_signal", Op::CvSignal},      {"cv_broadcast", Op::CvBroadcast},
      {"barrier", Op::BarrierWait},     {"busy_spin", Op::BusySpin},
      {"sem_wait", Op::SemWait},        {"sem_post", Op::SemPost},
      {"yield", Op::Yield},             {"timed_wait", Op::TimedWait},
      {"notify", Op::Notify},           {"spawn", Op::Spawn},
      {"join", Op::Join},               {"join_all", Op::JoinAll},
      {"finish", Op::Finish}};

  for (std::size_t i = 0; i < programs.size(); ++i) {
    const auto& pj = programs[i];
    std::string where = "programs[" + std::to_string(i) + "]";
    detail::only_keys(pj, where, {"name", "locals", "segments"});
    Program p;
    if (pj.contains("name")) p.name = get_as<std::string>(pj["name"], where + ".name");
    if (pj.contains("locals")) {
      if (!pj["locals"].is_array()) throw Error(where + ".locals: expected an array");
      for (std::size_t k = 0; k < pj["locals"].size(); ++k)
        p.locals.push_back(detail::decl_from_json(
            pj["locals"][k], where + ".locals[" + std::to_string(k) + "]"));
    }
    if (!pj.contains("segments") || !pj["segments"].is_array())
      throw Error(where + ".segments: required array");
    const auto& segs = pj["segments"];
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const auto& sj = segs[k];
      std::string sw = where + ".segments[" + std::to_string(k) + "]";
      if (!sj.is_object() || !sj.contains("op")) throw Error(sw + ".op: required");
      auto name = get_as<std::string>(sj["op"], sw + ".op");
      auto it = ops.find(name);
      if (it == ops.end()) throw Error(sw + ".op: unknown operation '" + name + "'");
      Segment s;
      s.op = it->second;
      auto need = [&](const char* key) -> const Json& {
        if (!sj.contains(key)) throw Error(sw + "." + key + ": required");
        return sj[key];
      };
      switch (s.op) {
        case Op::Compute:
          detail::only_keys(sj, sw, {"op", "ns"});
          s.duration = Nanos(get_as<std::int64_t>(need("ns"), sw + ".ns"));
          break;
        case Op::CvWait:
          detail::only_keys(sj, sw, {"op", "obj", "mutex"});
          s.obj = detail::parse_ref(need("obj"), sw + ".obj");
          s.obj2 = detail::parse_ref(need("mutex"), sw + ".mutex");
          break;
        case Op::TimedWait:
          detail::only_keys(sj, sw, {"op", "ns", "flag"});
          s.duration = Nanos(get_as<std::int64_t>(need("ns"), sw + ".ns"));
          if (sj.contains("flag")) s.obj2 = detail::parse_ref(sj["flag"], sw + ".flag");
          break;
        case Op::Spawn:
          detail::only_keys(sj, sw, {"op", "program", "domain"});
          s.program = program_ref(need("program"), sw + ".program");
          if (sj.contains("domain"))
            s.domain = get_as<std::uint32_t>(sj["domain"], sw + ".domain");
          break;
        case Op::Join:
          detail::only_keys(sj, sw, {"op", "child"});
          s.child = get_as<std::uint32_t>(need("child"), sw + ".child");
          break;
        default:
          if (takes_object(s.op)) {
            detail::only_keys(sj, sw, {"op", "obj"});
            s.obj = detail::parse_ref(need("obj"), sw + ".obj");
          } else {
            detail::only_keys(sj, sw, {"op"});
          }
          break;
      }
      p.segments.push_back(s);
    }
    w.programs.push_back(std::move(p));
  }

  const auto& tasks = array_of("tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& tj = tasks[i];
    std::string where = "tasks[" + std::to_string(i) + "]";
    detail::only_keys(tj, where,
                      {"program", "domain", "arrival_ns", "after", "request", "attached", "weight"});
    TaskDecl t;
    if (!tj.contains("program")) throw Error(where + ".program: required");
    t.program = program_ref(tj["program"], where + ".program");
    if (tj.contains("domain")) t.domain = get_as<std::uint32_t>(tj["domain"], where + ".domain");
    if (tj.contains("arrival_ns"))
      t.arrival = Nanos(get_as<std::int64_t>(tj["arrival_ns"], where + ".arrival_ns"));
    if (tj.contains("after"))
      t.after = get_as<std::vector<std::uint32_t>>(tj["after"], where + ".after");
    if (tj.contains("request")) t.request = get_as<bool>(tj["request"], where + ".request");
    if (tj.contains("attached")) t.attached = get_as<bool>(tj["attached"], where + ".attached");
    if (tj.contains("weight")) t.weight = get_as<double>(tj["weight"], where + ".weight");
    w.tasks.push_back(std::move(t));
  }
  w.validate();
  return w;
}

inline Workload parse_workload(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("workload: invalid JSON: ") + e.what());
  }
  return workload_from_json(j);
}

inline Workload load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open workload file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_workload(text);
}

}  // namespace coopsched::sim
