#include "tsrep/checkpoint.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace tsrep {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "tsrep-checkpoint";

json tensor_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data", std::vector<double>(t.data(), t.data() + t.size())}};
}

json params_json(const ParamSet& p) {
  json out = json::object();
  for (const auto& [name, t] : p) out[name] = tensor_json(t);
  return out;
}

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw CheckpointError("checkpoint field '" + field + "': " + why);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) bad(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& path = "") {
  const std::string where = path.empty() ? key : path + "." + key;
  const json& v = field(obj, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    bad(where, e.what());
  }
}

Tensor tensor_from(const json& j, const std::string& where) {
  Shape shape = get<Shape>(j, "shape", where);
  for (Index d : shape)
    if (d < 0) bad(where + ".shape", "negative extent");
  std::vector<double> data = get<std::vector<double>>(j, "data", where);
  if (static_cast<Index>(data.size()) != shape_numel(shape)) {
    bad(where + ".data", "expected " + std::to_string(shape_numel(shape)) + " values, found " +
                             std::to_string(data.size()));
  }
  for (double v : data)
    if (!std::isfinite(v)) bad(where + ".data", "non-finite value");
  return Tensor(std::move(shape), std::move(data));
}

ParamSet params_from(const json& j, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  ParamSet p;
  for (const auto& [name, t] : j.items()) p.add(name, tensor_from(t, where + "." + name));
  return p;
}

}  // namespace

void save_checkpoint(const TeacherStudentState& state, const std::string& path,
                     const std::optional<ResumeState>& resume) {
  const ModelDims& d = state.dims;
  json doc{{"format", kFormat},
           {"version", kCheckpointVersion},
           {"dims",
            {{"input_channels", d.input_channels},
             {"hidden", d.hidden},
             {"repr", d.repr},
             {"width", d.width},
             {"blocks", d.blocks},
             {"kernel", d.kernel}}},
           {"momentum", state.momentum},
           {"lambda", state.lambda},
           {"iteration", state.iteration},
           {"center", tensor_json(state.center)},
           {"teacher", params_json(state.teacher)},
           {"student", params_json(state.student)}};
  if (resume) {
    doc["resume"] = {{"rng", resume->rng},
                     {"adam_steps", resume->adam_steps},
                     {"adam_first", params_json(resume->adam_first)},
                     {"adam_second", params_json(resume->adam_second)}};
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + tmp + "' for writing");
    out << doc.dump() << '\n';
    if (!out) throw CheckpointError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

TeacherStudentState load_checkpoint(const std::string& path, std::optional<ResumeState>* resume) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  if (get<std::string>(doc, "format") != kFormat) bad("format", "not a tsrep checkpoint");
  const int version = get<int>(doc, "version");
  if (version != kCheckpointVersion) {
    bad("version", "found " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }

  TeacherStudentState s;
  const json& dims = field(doc, "dims", "");
  s.dims.input_channels = get<Index>(dims, "input_channels", "dims");
  s.dims.hidden = get<Index>(dims, "hidden", "dims");
  s.dims.repr = get<Index>(dims, "repr", "dims");
  s.dims.width = get<Index>(dims, "width", "dims");
  s.dims.blocks = get<Index>(dims, "blocks", "dims");
  s.dims.kernel = get<Index>(dims, "kernel", "dims");
  try {
    s.dims.validate();
  } catch (const ParameterError& e) {
    bad("dims", e.what());
  }
  s.momentum = get<double>(doc, "momentum");
  if (!(s.momentum >= 0.0 && s.momentum < 1.0)) bad("momentum", "outside [0, 1)");
  s.lambda = get<double>(doc, "lambda");
  if (!(s.lambda >= 0.0 && s.lambda <= 1.0)) bad("lambda", "outside [0, 1]");
  s.iteration = get<long>(doc, "iteration");
  if (s.iteration < 0) bad("iteration", "negative");
  s.center = tensor_from(field(doc, "center", ""), "center");
  if (s.center.shape() != Shape{s.dims.repr}) bad("center", "shape does not match dims.repr");
  s.teacher = params_from(field(doc, "teacher", ""), "teacher");
  s.student = params_from(field(doc, "student", ""), "student");

  const TeacherStudentState reference = init_params(0, s.dims);
  if (!s.student.same_layout(reference.student)) bad("student", "parameter names or shapes do not match dims");
  if (!s.teacher.same_layout(reference.teacher)) bad("teacher", "parameter names or shapes do not match dims");

  if (resume) {
    resume->reset();
    if (auto it = doc.find("resume"); it != doc.end()) {
      ResumeState r;
      r.rng = get<std::string>(*it, "rng", "resume");
      r.adam_steps = get<long>(*it, "adam_steps", "resume");
      r.adam_first = params_from(field(*it, "adam_first", "resume"), "resume.adam_first");
      r.adam_second = params_from(field(*it, "adam_second", "resume"), "resume.adam_second");
      *resume = std::move(r);
    }
  }
  return s;
}

}  // namespace tsrep
