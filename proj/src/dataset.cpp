#include "traylab/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "json.hpp"

#include "traylab/errors.hpp"
#include "traylab/format.hpp"
#include "traylab/render.hpp"
#include "traylab/rng.hpp"
#include "traylab/scene_dsl.hpp"

namespace traylab {

using nlohmann::json;

bool ProblemInstance::operator==(const ProblemInstance& o) const {
  return id == o.id && classes == o.classes && class_params == o.class_params && task_layout == o.task_layout &&
         aux_layout == o.aux_layout && pusher_start == o.pusher_start &&
         task_pusher_velocity == o.task_pusher_velocity && aux_pusher_velocity == o.aux_pusher_velocity &&
         qa_candidates == o.qa_candidates && qa_answer == o.qa_answer && sim.dt == o.sim.dt &&
         sim.n_steps == o.sim.n_steps && sim.gravity == o.sim.gravity &&
         sim.tilt_threshold_deg == o.sim.tilt_threshold_deg && sim.restitution == o.sim.restitution &&
         sim.sample_stride == o.sim.sample_stride && aux_trajectories == o.aux_trajectories;
}

namespace {

constexpr std::array<GridCell, 5> kAuxCells{{{1, 3}, {1, 2}, {1, 1}, {2, 3}, {2, 2}}};

double round1(double v) { return std::round(v * 10.0) / 10.0; }

// Uniform draw on the one-decimal grid strictly inside the open ends of `b`.
double sample_on_grid(Rng& rng, const Bound& b) {
  for (;;) {
    const double v = round1(rng.uniform(b.lo, b.hi));
    if (b.contains(v)) return v;
  }
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
}

std::vector<Color> palette_sorted(std::vector<Color> colors) {
  std::sort(colors.begin(), colors.end());
  return colors;
}

}  // namespace

void validate(const DatasetConfig& config) {
  if (config.classes.empty()) throw StructuralError("dataset needs at least one object class");
  if (std::set<ObjectClass>(config.classes.begin(), config.classes.end()).size() != config.classes.size()) {
    throw StructuralError("dataset class list has duplicates");
  }
  if (config.min_instances < static_cast<int>(config.classes.size()) || config.max_instances > 9 ||
      config.min_instances > config.max_instances) {
    throw StructuralError("instance count range must cover every class and fit the 3x3 grid");
  }
  if (config.n_candidates < 1 || config.n_candidates > config.min_instances) {
    throw StructuralError("candidate count must be between 1 and the minimum instance count");
  }
  if (config.velocity.lo > config.velocity.hi) throw StructuralError("velocity range is empty");
  if (config.sim.n_steps < 0 || config.sim.dt <= 0.0 || config.sim.sample_stride <= 0) {
    throw StructuralError("invalid simulation settings");
  }
}

SceneSpec task_scene(const ProblemInstance& problem, const ClassParamMap& params) {
  return build_scene(problem.task_layout, params, problem.task_pusher_velocity, problem.pusher_start);
}

SceneSpec aux_scene(const ProblemInstance& problem, const ClassParamMap& params) {
  return build_scene(problem.aux_layout, params, problem.aux_pusher_velocity, problem.pusher_start);
}

GroundTruth compute_ground_truth(const ProblemInstance& problem) {
  GroundTruth truth;
  truth.aux_trajectories = run_simulation(aux_scene(problem, problem.class_params), problem.sim).trajectories;

  const SceneSpec task = task_scene(problem, problem.class_params);
  const SimResult result = run_simulation(task, problem.sim);
  for (Color c : problem.qa_candidates) {
    const LayoutEntry* e = problem.task_layout.find(c);
    if (e != nullptr && result.stability.stable.at(e->object_id)) truth.qa_answer.push_back(c);
  }
  return truth;
}

ProblemInstance generate_problem(std::uint64_t seed, const DatasetConfig& config, const std::string& id) {
  validate(config);
  Rng rng(seed);
  ProblemInstance p;
  p.id = id;
  p.classes = config.classes;
  p.sim = config.sim;
  p.aux_pusher_velocity = config.aux_velocity;

  for (ObjectClass cls : config.classes) {
    PhysicsParams params;
    params.sliding_friction = sample_on_grid(rng, config.ranges.sliding_friction);
    params.armature = sample_on_grid(rng, config.ranges.armature);
    params.stiffness = sample_on_grid(rng, config.ranges.stiffness);
    params.damping = sample_on_grid(rng, config.ranges.damping);
    params.mass = class_info(cls).mass;
    p.class_params[cls] = params;
  }

  // Task layout: every class at least once, the rest uniform.
  const auto span = static_cast<std::size_t>(config.max_instances - config.min_instances + 1);
  const std::size_t n = static_cast<std::size_t>(config.min_instances) + rng.below(span);
  std::vector<GridCell> cells;
  for (int r = 1; r <= 3; ++r) {
    for (int c = 1; c <= 3; ++c) cells.push_back({r, c});
  }
  shuffle(cells, rng);
  cells.resize(n);
  std::sort(cells.begin(), cells.end());

  std::vector<ObjectClass> classes = config.classes;
  while (classes.size() < n) classes.push_back(config.classes[rng.below(config.classes.size())]);
  shuffle(classes, rng);

  std::vector<Color> colors(kPalette.begin(), kPalette.end());
  shuffle(colors, rng);

  for (std::size_t i = 0; i < n; ++i) {
    p.task_layout.entries.push_back({static_cast<int>(i + 1), classes[i], cells[i], colors[i]});
  }

  p.task_pusher_velocity = {round1(rng.uniform(config.velocity.lo, config.velocity.hi)),
                            round1(rng.uniform(config.velocity.lo, config.velocity.hi))};

  // Auxiliary layout: one instance per task class, catalog order, fixed cells.
  std::vector<Color> aux_colors(kPalette.begin(), kPalette.end());
  shuffle(aux_colors, rng);
  const auto present = classes_in(p.task_layout);
  for (std::size_t i = 0; i < present.size(); ++i) {
    p.aux_layout.entries.push_back({static_cast<int>(i + 1), present[i], kAuxCells[i], aux_colors[i]});
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(order, rng);
  for (std::size_t i = 0; i < static_cast<std::size_t>(config.n_candidates); ++i) {
    p.qa_candidates.push_back(p.task_layout.entries[order[i]].color);
  }
  p.qa_candidates = palette_sorted(std::move(p.qa_candidates));

  GroundTruth truth = compute_ground_truth(p);
  p.qa_answer = std::move(truth.qa_answer);
  p.aux_trajectories = std::move(truth.aux_trajectories);
  return p;
}

std::vector<ProblemInstance> generate_dataset(const DatasetConfig& config) {
  validate(config);
  const auto n = static_cast<long>(std::max(config.n_problems, 0));
  std::vector<ProblemInstance> problems(static_cast<std::size_t>(n));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      std::array<char, 32> id{};
      std::snprintf(id.data(), id.size(), "problem_%03ld", i);
      problems[static_cast<std::size_t>(i)] =
          generate_problem(derive_seed(config.seed, static_cast<std::uint64_t>(i)), config, id.data());
    } catch (...) {
#pragma omp critical(traylab_dataset_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return problems;
}

std::string format_trajectories(const TrajectorySet& trajectories, int stride) {
  if (trajectories.objects.empty()) throw StructuralError("cannot format an empty trajectory set");
  if (stride <= 0) throw StructuralError("trajectory stride must be positive");
  std::string out;
  for (const auto& t : trajectories.objects) {
    out += to_string(t.cls);
    out += "_motion_trajectory (x, y, z) = [";
    for (std::size_t k = 0; k < t.points.size(); k += static_cast<std::size_t>(stride)) {
      if (k > 0) out += ", ";
      const Point3& p = t.points[k];
      out += '(' + format_fixed(p.x, 1) + ", " + format_fixed(p.y, 1) + ", " + format_fixed(p.z, 1) + ')';
    }
    out += "]\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json params_json(const PhysicsParams& p) {
  return {{"sliding_friction", p.sliding_friction},
          {"armature", p.armature},
          {"stiffness", p.stiffness},
          {"damping", p.damping},
          {"mass", p.mass}};
}

json layout_json(const SceneLayout& layout) {
  json out = json::array();
  for (const auto& e : layout.entries) {
    out.push_back({{"object_id", e.object_id},
                   {"class", to_string(e.cls)},
                   {"row", e.cell.row},
                   {"column", e.cell.column},
                   {"color", to_string(e.color)}});
  }
  return out;
}

json colors_json(const std::vector<Color>& colors) {
  json out = json::array();
  for (Color c : colors) out.push_back(to_string(c));
  return out;
}

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what) const { throw IoError(source_, what); }

  const json& field(const json& obj, const char* key) const {
    if (!obj.is_object()) fail(std::string("expected an object around '") + key + "'");
    auto it = obj.find(key);
    if (it == obj.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  double number(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
    return v.get<double>();
  }

  int integer(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
    return v.get<int>();
  }

  std::string text(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  const json& array(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
    return v;
  }

  ObjectClass object_class(const std::string& name) const {
    auto cls = parse_object_class(name);
    if (!cls) fail("unknown object class '" + name + "'");
    return *cls;
  }

  Color color(const json& v) const {
    if (!v.is_string()) fail("color must be a string");
    auto c = parse_color(v.get<std::string>());
    if (!c) fail("unknown color '" + v.get<std::string>() + "'");
    return *c;
  }

  Vec2 vec2(const json& obj, const char* key) const {
    const json& v = array(obj, key);
    if (v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(std::string("field '") + key + "' must be two numbers");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  SceneLayout layout(const json& obj, const char* key) const {
    SceneLayout out;
    for (const auto& e : array(obj, key)) {
      out.entries.push_back({integer(e, "object_id"), object_class(text(e, "class")),
                             {integer(e, "row"), integer(e, "column")}, color(field(e, "color"))});
    }
    try {
      validate_layout(out);
    } catch (const StructuralError& err) {
      fail(std::string(key) + ": " + err.what());
    }
    return out;
  }

  std::vector<Color> colors(const json& obj, const char* key) const {
    std::vector<Color> out;
    for (const auto& c : array(obj, key)) out.push_back(color(c));
    return out;
  }

 private:
  std::string source_;
};

}  // namespace

std::string layout_to_json(const SceneLayout& layout) { return layout_json(layout).dump(1) + "\n"; }

SceneLayout layout_from_json(const std::string& text, const std::string& source) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError(source, "not valid JSON");
  if (j.is_array()) j = json{{"layout", std::move(j)}};
  return Reader(source).layout(j, "layout");
}

std::string problem_to_json(const ProblemInstance& p) {
  json j;
  j["id"] = p.id;
  json classes = json::array();
  for (ObjectClass c : p.classes) classes.push_back(to_string(c));
  j["classes"] = classes;
  json params = json::object();
  for (const auto& [cls, value] : p.class_params) params[std::string(to_string(cls))] = params_json(value);
  j["class_params"] = params;
  j["task_layout"] = layout_json(p.task_layout);
  j["aux_layout"] = layout_json(p.aux_layout);
  j["pusher_start"] = {p.pusher_start.x, p.pusher_start.y};
  j["task_pusher_velocity"] = {p.task_pusher_velocity.x, p.task_pusher_velocity.y};
  j["aux_pusher_velocity"] = {p.aux_pusher_velocity.x, p.aux_pusher_velocity.y};
  j["qa_candidates"] = colors_json(p.qa_candidates);
  j["qa_answer"] = colors_json(p.qa_answer);
  j["sim"] = {{"dt", p.sim.dt},
              {"n_steps", p.sim.n_steps},
              {"gravity", p.sim.gravity},
              {"tilt_threshold_deg", p.sim.tilt_threshold_deg},
              {"restitution", p.sim.restitution},
              {"sample_stride", p.sim.sample_stride}};
  json trajectories = json::array();
  for (const auto& t : p.aux_trajectories.objects) {
    json points = json::array();
    for (const auto& q : t.points) points.push_back({q.x, q.y, q.z});
    trajectories.push_back({{"object_id", t.object_id}, {"class", to_string(t.cls)}, {"points", points}});
  }
  j["aux_trajectories"] = trajectories;
  return j.dump(1) + "\n";
}

ProblemInstance problem_from_json(const std::string& text, const std::string& source) {
  const Reader r(source);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    r.fail(std::string("malformed JSON: ") + e.what());
  }

  ProblemInstance p;
  p.id = r.text(j, "id");
  for (const auto& c : r.array(j, "classes")) {
    if (!c.is_string()) r.fail("class names must be strings");
    p.classes.push_back(r.object_class(c.get<std::string>()));
  }
  const json& params = r.field(j, "class_params");
  if (!params.is_object()) r.fail("field 'class_params' must be an object");
  for (const auto& [name, v] : params.items()) {
    p.class_params[r.object_class(name)] = {r.number(v, "sliding_friction"), r.number(v, "armature"),
                                            r.number(v, "stiffness"), r.number(v, "damping"), r.number(v, "mass")};
  }
  p.task_layout = r.layout(j, "task_layout");
  p.aux_layout = r.layout(j, "aux_layout");
  p.pusher_start = r.vec2(j, "pusher_start");
  p.task_pusher_velocity = r.vec2(j, "task_pusher_velocity");
  p.aux_pusher_velocity = r.vec2(j, "aux_pusher_velocity");
  p.qa_candidates = r.colors(j, "qa_candidates");
  p.qa_answer = r.colors(j, "qa_answer");

  const json& sim = r.field(j, "sim");
  p.sim.dt = r.number(sim, "dt");
  p.sim.n_steps = r.integer(sim, "n_steps");
  p.sim.gravity = r.number(sim, "gravity");
  p.sim.tilt_threshold_deg = r.number(sim, "tilt_threshold_deg");
  p.sim.restitution = r.number(sim, "restitution");
  p.sim.sample_stride = r.integer(sim, "sample_stride");

  for (const auto& t : r.array(j, "aux_trajectories")) {
    Trajectory traj;
    traj.object_id = r.integer(t, "object_id");
    traj.cls = r.object_class(r.text(t, "class"));
    for (const auto& q : r.array(t, "points")) {
      if (!q.is_array() || q.size() != 3) r.fail("trajectory points must be [x, y, z]");
      traj.points.push_back({q[0].get<double>(), q[1].get<double>(), q[2].get<double>()});
    }
    p.aux_trajectories.objects.push_back(std::move(traj));
  }

  for (const auto& e : p.task_layout.entries) {
    if (!p.class_params.contains(e.cls)) r.fail("class_params lacks " + std::string(to_string(e.cls)));
  }
  for (Color c : p.qa_candidates) {
    if (p.task_layout.find(c) == nullptr) r.fail("candidate " + std::string(to_string(c)) + " is not in the task");
  }
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void persist(const ProblemInstance& problem, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  write_text(dir / "problem.json", problem_to_json(problem));
  write_text(dir / "aux_trajectories.txt", format_trajectories(problem.aux_trajectories, problem.sim.sample_stride));
  write_text(dir / "aux_program.txt",
             emit_program(make_program(problem.aux_layout, problem.class_params, problem.pusher_start)));
  write_text(dir / "task_program.txt",
             emit_program(make_program(problem.task_layout, problem.class_params, problem.pusher_start)));
  write_png(render_top_down(problem.task_layout), dir / "top_down.png");
}

ProblemInstance load_problem(const std::filesystem::path& dir) {
  const auto path = dir / "problem.json";
  return problem_from_json(read_text(path), path.string());
}

std::vector<ProblemInstance> load_dataset(const std::filesystem::path& root) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) throw IoError(root.string(), "not a dataset directory");
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "problem.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<ProblemInstance> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_problem(d));
  return out;
}

}  // namespace traylab
