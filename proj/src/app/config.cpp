#include <algorithm>
#include <type_traits>
#include <functional>
#include <string>
#include <vector>

#include "motionseg/app.hpp"
#include "motionseg/errors.hpp"

namespace motionseg::app {

using nlohmann::json;

namespace {

struct Field {
  const char* key;
  std::function<json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const json&)> set;
};

template <typename T, typename Access>
Field field(const char* key, Access access) {
  Field f;
  f.key = key;
  f.get = [access](const PipelineConfig& c) {
    return json(access(const_cast<PipelineConfig&>(c)));
  };
  f.set = [access, key](PipelineConfig& c, const json& v) {
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer();
    } else {
      ok = v.is_number();
    }
    if (!ok) {
      throw Error(ErrorCode::kInvalidInput,
                  std::string("config: wrong type for \"") + key + "\"");
    }
    access(c) = v.get<T>();
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field<std::uint64_t>("seed", [](PipelineConfig& c) -> std::uint64_t& { return c.seed; }),
      field<double>("tau-m", [](PipelineConfig& c) -> double& { return c.affinity.tau_m; }),
      field<double>("tau-c", [](PipelineConfig& c) -> double& { return c.affinity.tau_c; }),
      field<double>("eta", [](PipelineConfig& c) -> double& { return c.affinity.eta; }),
      field<int>("dilation", [](PipelineConfig& c) -> int& { return c.affinity.dilation; }),
      field<int>("stride", [](PipelineConfig& c) -> int& { return c.affinity.stride; }),
      field<double>("tau2", [](PipelineConfig& c) -> double& { return c.compensation.tau2; }),
      field<int>("ransac-iters",
                 [](PipelineConfig& c) -> int& { return c.compensation.ransac_iters; }),
      field<double>("ransac-inlier-px",
                    [](PipelineConfig& c) -> double& { return c.compensation.ransac_inlier_px; }),
      field<bool>("compensation",
                  [](PipelineConfig& c) -> bool& { return c.compensation.use_compensation; }),
      field<bool>("box-filter",
                  [](PipelineConfig& c) -> bool& { return c.compensation.use_box_filter; }),
      field<bool>("bidirectional-filter", [](PipelineConfig& c) -> bool& {
        return c.compensation.use_bidirectional_filter;
      }),
      field<bool>("temporal-matching",
                  [](PipelineConfig& c) -> bool& { return c.compensation.use_temporal_matching; }),
      field<int>("median-radius",
                 [](PipelineConfig& c) -> int& { return c.compensation.post_median_radius; }),
      field<double>("blur-sigma",
                    [](PipelineConfig& c) -> double& { return c.compensation.blur_sigma; }),
      field<int>("max-corners",
                 [](PipelineConfig& c) -> int& { return c.compensation.corners.max_points; }),
      field<double>("corner-quality",
                    [](PipelineConfig& c) -> double& { return c.compensation.corners.quality; }),
      field<double>("corner-min-distance", [](PipelineConfig& c) -> double& {
        return c.compensation.corners.min_distance;
      }),
      field<int>("flow-levels", [](PipelineConfig& c) -> int& { return c.compensation.flow.levels; }),
      field<int>("flow-window", [](PipelineConfig& c) -> int& { return c.compensation.flow.window; }),
      field<int>("flow-max-iters",
                 [](PipelineConfig& c) -> int& { return c.compensation.flow.max_iters; }),
      field<double>("flow-eps", [](PipelineConfig& c) -> double& { return c.compensation.flow.eps; }),
      field<double>("lambda-affinity",
                    [](PipelineConfig& c) -> double& { return c.weights.affinity; }),
      field<double>("lambda-projection",
                    [](PipelineConfig& c) -> double& { return c.weights.projection; }),
      field<int>("boundary-tol", [](PipelineConfig& c) -> int& { return c.boundary_tol; }),
      field<double>("fg-threshold", [](PipelineConfig& c) -> double& { return c.fg_threshold; }),
      field<int>("steps", [](PipelineConfig& c) -> int& { return c.steps; }),
      field<double>("lr", [](PipelineConfig& c) -> double& { return c.lr; }),
      field<bool>("write-png", [](PipelineConfig& c) -> bool& { return c.write_png; }),
      field<bool>("write-raw", [](PipelineConfig& c) -> bool& { return c.write_raw; }),
  };
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  compensation.validate();
  affinity.validate();
  if (!(weights.affinity >= 0.0) || !(weights.projection >= 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "config: loss weights must be >= 0");
  }
  if (boundary_tol < -1) throw Error(ErrorCode::kInvalidParameter, "config: boundary-tol < -1");
  if (!(fg_threshold > 0.0 && fg_threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "config: fg-threshold outside (0,1)");
  }
  if (steps < 0) throw Error(ErrorCode::kInvalidParameter, "config: steps < 0");
  if (!(lr > 0.0)) throw Error(ErrorCode::kInvalidParameter, "config: lr must be > 0");
}

json config_to_json(const PipelineConfig& cfg) {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(cfg);
  return j;
}

PipelineConfig config_from_json(const json& j, PipelineConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidInput, "config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& table = fields();
    auto f = std::find_if(table.begin(), table.end(),
                          [&](const Field& fd) { return it.key() == fd.key; });
    if (f == table.end()) {
      throw Error(ErrorCode::kInvalidInput, "config: unknown key \"" + it.key() + "\"");
    }
    f->set(base, it.value());
  }
  return base;
}

}  // namespace motionseg::app
