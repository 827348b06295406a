/* Copyright 2026 The imbaclass Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "imbaclass/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "imbaclass/error.hpp"
#include "imbaclass/json_io.hpp"
#include "imbaclass/log.hpp"
#include "imbaclass/parallel.hpp"
#include "imbaclass/rng.hpp"

namespace imbaclass {

using nlohmann::json;

// --- plan ----------------------------------------------------------------------

std::string MethodSpec::name() const {
  switch (kind) {
    case MethodKind::kCrossEntropy: return "cross_entropy";
    case MethodKind::kFocal: return "focal";
    case MethodKind::kUnderSampling: return "under_sampling";
    case MethodKind::kOverSampling: return "over_sampling";
  }
  return "";
}

std::vector<LossConfig> MethodSpec::candidates() const {
  if (kind != MethodKind::kFocal) return {LossConfig::cross_entropy()};
  std::vector<LossConfig> out;
  for (double a : alphas) out.push_back(LossConfig::focal(a, gamma));
  return out;
}

void ExperimentPlan::validate() const {
  IMBACLASS_REQUIRE(dataset.directory.has_value() != dataset.synthetic.has_value(),
                    "plan needs exactly one dataset source (directory or synthetic)");
  if (dataset.synthetic) dataset.synthetic->validate();
  IMBACLASS_REQUIRE(!models.empty(), "plan lists no models");
  for (const auto& m : models) (void)NetworkSpec::by_id(m);
  IMBACLASS_REQUIRE(!methods.empty(), "plan lists no methods");
  for (const MethodSpec& m : methods) {
    if (m.kind == MethodKind::kFocal)
      IMBACLASS_REQUIRE(!m.alphas.empty(), "focal method needs a non-empty alpha list");
    for (const LossConfig& l : m.candidates()) l.validate();
    if (m.kind == MethodKind::kOverSampling) m.augmentation.validate();
  }
  IMBACLASS_REQUIRE(split > 0.0 && split < 1.0, "split must lie in (0, 1)");
  IMBACLASS_REQUIRE(folds >= 2, "folds must be >= 2");
  train.validate();
  IMBACLASS_REQUIRE(train.max_epochs >= 1, "max_epochs must be >= 1 for an experiment");
  for (const auto& row : distribution_schedule) {
    IMBACLASS_REQUIRE(!row.empty(), "empty distribution_schedule entry");
    for (std::int64_t c : row) IMBACLASS_REQUIRE(c >= 1, "distribution counts must be >= 1");
  }
}

namespace {

void require_keys(const json& j, const std::string& what, std::initializer_list<const char*> allowed) {
  IMBACLASS_REQUIRE(j.is_object(), what + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    IMBACLASS_REQUIRE(std::find_if(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; }) != allowed.end(),
                      what + ": unknown key '" + key + "'");
}

template <class T>
T value_or(const json& j, const char* key, T fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(what + ": key '" + key + "' has the wrong type");
  }
}

MethodSpec method_from_json(const json& j) {
  require_keys(j, "method", {"type", "alphas", "gamma", "augmentation"});
  MethodSpec m;
  const auto type = value_or<std::string>(j, "type", "", "method");
  if (type == "cross_entropy") {
    m.kind = MethodKind::kCrossEntropy;
  } else if (type == "focal") {
    m.kind = MethodKind::kFocal;
    m.alphas = value_or<std::vector<double>>(j, "alphas", {}, "method");
    m.gamma = value_or(j, "gamma", m.gamma, "method");
  } else if (type == "under_sampling") {
    m.kind = MethodKind::kUnderSampling;
  } else if (type == "over_sampling") {
    m.kind = MethodKind::kOverSampling;
    if (j.contains("augmentation")) {
      const json& a = j.at("augmentation");
      require_keys(a, "augmentation", {"rotation_degrees", "horizontal_flip", "vertical_flip"});
      m.augmentation.rotation_degrees =
          value_or(a, "rotation_degrees", m.augmentation.rotation_degrees, "augmentation");
      m.augmentation.horizontal_flip =
          value_or(a, "horizontal_flip", m.augmentation.horizontal_flip, "augmentation");
      m.augmentation.vertical_flip =
          value_or(a, "vertical_flip", m.augmentation.vertical_flip, "augmentation");
    }
  } else {
    throw InvalidArgument("unknown method type '" + type +
                          "' (expected cross_entropy, focal, under_sampling or over_sampling)");
  }
  if (m.kind != MethodKind::kFocal)
    IMBACLASS_REQUIRE(!j.contains("alphas") && !j.contains("gamma"),
                      "alphas/gamma only apply to the focal method");
  if (m.kind != MethodKind::kOverSampling)
    IMBACLASS_REQUIRE(!j.contains("augmentation"), "augmentation only applies to over_sampling");
  return m;
}

json method_to_json(const MethodSpec& m) {
  json j{{"type", m.name()}};
  if (m.kind == MethodKind::kFocal) {
    j["alphas"] = m.alphas;
    j["gamma"] = m.gamma;
  }
  if (m.kind == MethodKind::kOverSampling)
    j["augmentation"] = {{"rotation_degrees", m.augmentation.rotation_degrees},
                         {"horizontal_flip", m.augmentation.horizontal_flip},
                         {"vertical_flip", m.augmentation.vertical_flip}};
  return j;
}

}  // namespace

ExperimentPlan plan_from_json(const json& j, const std::filesystem::path& base_dir) {
  require_keys(j, "plan", {"dataset", "model", "models", "methods", "split", "folds", "train",
                           "distribution_schedule", "seed"});
  ExperimentPlan plan;
  IMBACLASS_REQUIRE(j.contains("dataset"), "plan: missing 'dataset'");
  const json& ds = j.at("dataset");
  require_keys(ds, "dataset", {"directory", "synthetic"});
  if (ds.contains("directory")) {
    std::filesystem::path dir = value_or<std::string>(ds, "directory", "", "dataset");
    plan.dataset.directory = dir.is_relative() ? base_dir / dir : dir;
  }
  if (ds.contains("synthetic")) {
    const json& s = ds.at("synthetic");
    require_keys(s, "synthetic dataset", {"image_size", "class_counts", "noise_std", "seed"});
    SynthConfig cfg;
    cfg.image_size = value_or(s, "image_size", cfg.image_size, "synthetic dataset");
    cfg.class_counts = value_or<std::vector<std::int64_t>>(s, "class_counts", {}, "synthetic dataset");
    cfg.noise_std = value_or(s, "noise_std", cfg.noise_std, "synthetic dataset");
    plan.dataset.synthetic_seed_given = s.contains("seed");
    cfg.seed = value_or<std::uint64_t>(s, "seed", 0, "synthetic dataset");
    plan.dataset.synthetic = cfg;
  }
  IMBACLASS_REQUIRE(!(j.contains("model") && j.contains("models")),
                    "plan: give either 'model' or 'models', not both");
  if (j.contains("model")) plan.models = {value_or<std::string>(j, "model", "", "plan")};
  if (j.contains("models")) {
    if (j.at("models").is_string())
      plan.models = {j.at("models").get<std::string>()};
    else
      plan.models = value_or<std::vector<std::string>>(j, "models", {}, "plan");
  }
  IMBACLASS_REQUIRE(j.contains("methods") && j.at("methods").is_array(),
                    "plan: 'methods' must be an array");
  for (const json& m : j.at("methods")) plan.methods.push_back(method_from_json(m));
  plan.split = value_or(j, "split", plan.split, "plan");
  plan.folds = value_or(j, "folds", plan.folds, "plan");
  if (j.contains("train")) plan.train = train_config_from_json(j.at("train"));
  plan.distribution_schedule = value_or<std::vector<std::vector<std::int64_t>>>(
      j, "distribution_schedule", {}, "plan");
  plan.seed = value_or<std::uint64_t>(j, "seed", 0, "plan");
  plan.validate();
  return plan;
}

json to_json(const ExperimentPlan& plan) {
  json ds;
  if (plan.dataset.directory) ds["directory"] = plan.dataset.directory->string();
  if (plan.dataset.synthetic) {
    const SynthConfig& s = *plan.dataset.synthetic;
    ds["synthetic"] = {{"image_size", s.image_size}, {"class_counts", s.class_counts},
                       {"noise_std", s.noise_std}};
    if (plan.dataset.synthetic_seed_given) ds["synthetic"]["seed"] = s.seed;
  }
  json methods = json::array();
  for (const MethodSpec& m : plan.methods) methods.push_back(method_to_json(m));
  json j{{"dataset", ds},
         {"models", plan.models},
         {"methods", methods},
         {"split", plan.split},
         {"folds", plan.folds},
         {"train", to_json(plan.train)},
         {"seed", plan.seed}};
  if (!plan.distribution_schedule.empty()) j["distribution_schedule"] = plan.distribution_schedule;
  return j;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  return plan_from_json(read_json_file(path), path.parent_path());
}

// --- data partitioning ------------------------------------------------------------

TrainTestSplit split_dataset(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  IMBACLASS_REQUIRE(fraction > 0.0 && fraction < 1.0, "split fraction must lie in (0, 1)");
  data.validate();
  std::vector<std::size_t> train_idx, test_idx;
  for (int c = 0; c < data.num_classes; ++c) {
    std::vector<std::size_t> idx = data.indices_of_class(c);
    IMBACLASS_REQUIRE(idx.size() >= 2, "class " + std::to_string(c) +
                                           " has fewer than 2 samples and cannot be split");
    Rng(derive_seed(seed, "split", static_cast<std::uint64_t>(c))).shuffle(idx);
    auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * fraction + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

std::vector<int> stratified_folds(const LabeledDataset& data, int folds, std::uint64_t seed) {
  IMBACLASS_REQUIRE(folds >= 2, "folds must be >= 2");
  data.validate();
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    IMBACLASS_REQUIRE(counts[c] >= folds, fmt::format("class {} has {} training samples, fewer than "
                                                      "the {} folds requested", c, counts[c], folds));
  std::vector<int> fold(data.size(), -1);
  std::size_t dealt = 0;
  for (int c = 0; c < data.num_classes; ++c) {
    std::vector<std::size_t> idx = data.indices_of_class(c);
    Rng(derive_seed(seed, "fold", static_cast<std::uint64_t>(c))).shuffle(idx);
    for (std::size_t i : idx) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

LabeledDataset build_distribution(const LabeledDataset& data, std::span<const std::int64_t> targets,
                                  std::uint64_t seed) {
  data.validate();
  IMBACLASS_REQUIRE(static_cast<int>(targets.size()) == data.num_classes,
                    fmt::format("distribution has {} counts but the dataset has {} classes",
                                targets.size(), data.num_classes));
  const auto counts = data.class_counts();
  std::vector<std::size_t> keep;
  for (int c = 0; c < data.num_classes; ++c) {
    const auto t = targets[static_cast<std::size_t>(c)];
    IMBACLASS_REQUIRE(t >= 0 && t <= counts[c],
                      fmt::format("class {} needs {} samples but only {} are available", c, t, counts[c]));
    std::vector<std::size_t> idx = data.indices_of_class(c);
    Rng(derive_seed(seed, "distribution", static_cast<std::uint64_t>(c))).shuffle(idx);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(t));
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

// --- cross-validation -------------------------------------------------------------

Selection select_alpha_epoch(const CvSurface& s) {
  IMBACLASS_REQUIRE(!s.alphas.empty() && s.alphas.size() == s.mean_val_loss.size(),
                    "validation surface has no candidates");
  const std::size_t epochs = s.mean_val_loss.front().size();
  IMBACLASS_REQUIRE(epochs >= 1, "validation surface has no epochs");
  std::vector<std::size_t> by_alpha(s.alphas.size());
  for (std::size_t i = 0; i < by_alpha.size(); ++i) {
    IMBACLASS_REQUIRE(s.mean_val_loss[i].size() == epochs, "ragged validation surface");
    IMBACLASS_REQUIRE(s.alphas[i] > 0.0, "alpha must be > 0");
    by_alpha[i] = i;
  }
  std::stable_sort(by_alpha.begin(), by_alpha.end(),
                   [&](std::size_t a, std::size_t b) { return s.alphas[a] < s.alphas[b]; });
  Selection best;
  double best_value = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t e = 0; e < epochs; ++e)
    for (std::size_t a : by_alpha) {
      const double v = s.mean_val_loss[a][e] / s.alphas[a];
      if (std::isnan(v)) continue;
      if (!found || v < best_value) {
        best_value = v;
        best = {a, static_cast<int>(e + 1)};
        found = true;
      }
    }
  IMBACLASS_REQUIRE(found, "validation surface holds no finite loss");
  return best;
}

namespace {

LabeledDataset resample_for(const MethodSpec& method, const LabeledDataset& data, std::uint64_t seed) {
  switch (method.kind) {
    case MethodKind::kUnderSampling:
      return undersample(data, seed);
    case MethodKind::kOverSampling: {
      AugmentationConfig aug = method.augmentation;
      aug.seed = seed;
      return oversample(data, aug);
    }
    default:
      return data;
  }
}

}  // namespace

CrossValidation cross_validate(const NetworkSpec& spec, const LabeledDataset& train,
                               const MethodSpec& method, const TrainConfig& cfg, int folds,
                               std::uint64_t seed, int jobs) {
  cfg.validate();
  const std::vector<int> fold_of = stratified_folds(train, folds, seed);
  std::vector<LabeledDataset> fit(static_cast<std::size_t>(folds)), held(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? out : in).push_back(i);
    fit[f] = resample_for(method, train.subset(in), derive_seed(seed, "cv-resample", f));
    held[f] = train.subset(out);
  }

  const std::vector<LossConfig> losses = method.candidates();
  const std::size_t n_jobs = losses.size() * static_cast<std::size_t>(folds);
  std::vector<std::vector<EpochRecord>> histories(n_jobs);
  parallel_for(n_jobs, jobs, [&](std::size_t job) {
    const std::size_t cand = job / static_cast<std::size_t>(folds);
    const std::size_t f = job % static_cast<std::size_t>(folds);
    TrainConfig run = cfg;
    run.loss = losses[cand];
    run.seed = derive_seed(seed, "cv-train", f);
    histories[job] = imbaclass::train(spec, fit[f], run, cfg.max_epochs, &held[f]).history;
    log().debug("cv {} {} fold {} done", method.name(), losses[cand].name(), f);
  });

  CrossValidation cv;
  for (std::size_t cand = 0; cand < losses.size(); ++cand) {
    cv.surface.alphas.push_back(losses[cand].family == LossFamily::kFocal ? losses[cand].alpha : 1.0);
    std::vector<double> mean(static_cast<std::size_t>(cfg.max_epochs), 0.0);
    for (int f = 0; f < folds; ++f) {
      const auto& h = histories[cand * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)];
      for (std::size_t e = 0; e < mean.size(); ++e) mean[e] += h[e].val_loss / folds;
    }
    cv.surface.mean_val_loss.push_back(std::move(mean));
  }
  cv.selected = select_alpha_epoch(cv.surface);
  return cv;
}

// --- experiment --------------------------------------------------------------------

namespace {

LabeledDataset load_source(const ExperimentPlan& plan) {
  if (plan.dataset.directory) return load_dataset(*plan.dataset.directory);
  SynthConfig cfg = *plan.dataset.synthetic;
  if (!plan.dataset.synthetic_seed_given) cfg.seed = derive_seed(plan.seed, "data");
  return generate_dataset(cfg);
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const ExperimentPlan& plan, int jobs) {
  plan.validate();
  const LabeledDataset source = load_source(plan);
  IMBACLASS_REQUIRE(!source.empty(), "experiment dataset is empty");
  source.validate();

  std::vector<std::vector<std::int64_t>> schedule = plan.distribution_schedule;
  const bool scheduled = !schedule.empty();
  if (!scheduled) schedule.push_back(source.class_counts());

  std::vector<ExperimentRow> rows;
  for (std::size_t d = 0; d < schedule.size(); ++d) {
    const LabeledDataset data =
        scheduled ? build_distribution(source, schedule[d], derive_seed(plan.seed, "distribution", d))
                  : source;
    const auto counts = data.class_counts();
    const double rho = imbalance_ratio(counts);
    const TrainTestSplit split = split_dataset(data, plan.split, derive_seed(plan.seed, "split", d));
    const std::uint64_t run_seed = derive_seed(plan.seed, "run", d);
    const Image& probe = data.samples.front().image;
    const Shape input{probe.channels(), probe.height(), probe.width()};

    for (const std::string& model : plan.models) {
      const NetworkSpec spec = NetworkSpec::by_id(model, input, data.num_classes);
      for (const MethodSpec& method : plan.methods) {
        log().info("rho {:.2f} {} {}: cross-validating", rho, model, method.name());
        ExperimentRow row;
        row.model = model;
        row.method = method.name();
        row.class_counts = counts;
        row.spec = spec;
        row.cv = cross_validate(spec, split.train, method, plan.train, plan.folds, run_seed, jobs);
        const LossConfig loss = method.candidates()[row.cv.selected.candidate];
        if (method.kind == MethodKind::kFocal) {
          row.alpha = loss.alpha;
          row.gamma = loss.gamma;
        }
        row.epoch = row.cv.selected.epoch;

        TrainConfig final_cfg = plan.train;
        final_cfg.loss = loss;
        final_cfg.seed = derive_seed(run_seed, "final-train");
        const LabeledDataset fit = resample_for(method, split.train, derive_seed(run_seed, "final-resample"));
        TrainResult trained = imbaclass::train(spec, fit, final_cfg, row.epoch);
        const Network<float> net(spec);
        row.test_predictions = predict_dataset(net, trained.params, split.test);
        row.report = evaluate(row.test_predictions, rho);
        row.final_history = std::move(trained.history);
        row.params = std::move(trained.params);
        log().info("rho {:.2f} {} {}: epoch {} accuracy {:.4f} f1 {:.4f}", rho, model, row.method,
                   row.epoch, row.report.accuracy, row.report.f1_macro);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

// --- output ------------------------------------------------------------------------

namespace {

std::string optional_fixed(const std::optional<double>& v) {
  return v ? fmt::format("{:.2f}", *v) : std::string();
}

std::string fixed6(double v) { return std::isnan(v) ? std::string("nan") : fmt::format("{:.6f}", v); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string run_dir_name(std::size_t index, const ExperimentRow& row) {
  return fmt::format("{:03d}_{}_{}_rho{:.2f}", index, row.model, row.method, row.report.rho);
}

}  // namespace

std::string results_csv(std::span<const ExperimentRow> rows) {
  std::string out = "method,alpha,gamma,epoch,accuracy,f1_macro,auroc_macro,rho,model\n";
  for (const ExperimentRow& r : rows)
    out += fmt::format("{},{},{},{},{},{},{},{:.2f},{}\n", r.method, optional_fixed(r.alpha),
                       optional_fixed(r.gamma), r.epoch, fixed6(r.report.accuracy),
                       fixed6(r.report.f1_macro), fixed6(r.report.auroc_macro), r.report.rho, r.model);
  return out;
}

void write_results(std::span<const ExperimentRow> rows, const ExperimentPlan& plan,
                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "runs");
  write_text(out_dir / "results.csv", results_csv(rows));
  write_text(out_dir / "plan.json", to_json(plan).dump(2) + "\n");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ExperimentRow& r = rows[i];
    const auto dir = out_dir / "runs" / run_dir_name(i, r);
    std::filesystem::create_directories(dir);

    json report{{"model", r.model},
                {"method", r.method},
                {"alpha", r.alpha ? json(*r.alpha) : json(nullptr)},
                {"gamma", r.gamma ? json(*r.gamma) : json(nullptr)},
                {"epoch", r.epoch},
                {"class_counts", r.class_counts},
                {"split", {{"train_fraction", plan.split}, {"stratified", true}}},
                {"folds", plan.folds},
                {"epoch_selection", "minimum mean validation loss across folds; focal losses divided by alpha"},
                {"train", to_json(plan.train)},
                {"evaluation", to_json(r.report)}};
    write_text(dir / "report.json", report.dump(2) + "\n");

    // train_loss from the final fit, val_loss from the cross-validation mean
    // of the selected candidate at the same epoch.
    const auto& cv_curve = r.cv.surface.mean_val_loss[r.cv.selected.candidate];
    std::string history = "epoch,train_loss,val_loss\n";
    for (const EpochRecord& e : r.final_history)
      history += fmt::format("{},{:.8f},{:.8f}\n", e.epoch, e.train_loss,
                             cv_curve[static_cast<std::size_t>(e.epoch - 1)]);
    write_text(dir / "loss_history.csv", history);

    std::string surface = "alpha,epoch,mean_val_loss\n";
    for (std::size_t a = 0; a < r.cv.surface.alphas.size(); ++a)
      for (std::size_t e = 0; e < r.cv.surface.mean_val_loss[a].size(); ++e)
        surface += fmt::format("{:.2f},{},{:.8f}\n", r.cv.surface.alphas[a], e + 1,
                               r.cv.surface.mean_val_loss[a][e]);
    write_text(dir / "cv_surface.csv", surface);

    const ConfusionMatrix& cm = r.report.confusion;
    std::string confusion = "true\\predicted";
    for (int c = 0; c < cm.num_classes; ++c) confusion += fmt::format(",{}", c);
    confusion += "\n";
    for (int t = 0; t < cm.num_classes; ++t) {
      confusion += std::to_string(t);
      for (int p = 0; p < cm.num_classes; ++p) confusion += fmt::format(",{}", cm.at(t, p));
      confusion += "\n";
    }
    write_text(dir / "confusion.csv", confusion);

    std::string roc = "class,fpr,tpr\n";
    const PredictionBatch& pb = r.test_predictions;
    std::vector<double> column(pb.size());
    std::vector<std::uint8_t> positive(pb.size());
    for (int c = 0; c < pb.num_classes; ++c) {
      for (std::size_t i2 = 0; i2 < pb.size(); ++i2) {
        column[i2] = pb.row(i2)[c];
        positive[i2] = pb.labels[i2] == c;
      }
      for (const RocPoint& p : roc_curve(column, positive))
        roc += fmt::format("{},{:.6f},{:.6f}\n", c, p.fpr, p.tpr);
    }
    write_text(dir / "roc.csv", roc);

    save_checkpoint(dir / "model.bin", r.spec, r.params);
  }
}

// --- report ------------------------------------------------------------------------

std::vector<ResultRecord> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  IMBACLASS_REQUIRE(std::getline(in, line) &&
                        line == "method,alpha,gamma,epoch,accuracy,f1_macro,auroc_macro,rho,model",
                    "not a results.csv file (unexpected header)");
  std::vector<ResultRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    IMBACLASS_REQUIRE(f.size() == 9, fmt::format("results.csv line {}: expected 9 fields", line_no));
    auto number = [&](const std::string& s) {
      try {
        return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
      } catch (const std::exception&) {
        throw InvalidArgument(fmt::format("results.csv line {}: bad number '{}'", line_no, s));
      }
    };
    ResultRecord r;
    r.method = f[0];
    if (!f[1].empty()) r.alpha = number(f[1]);
    if (!f[2].empty()) r.gamma = number(f[2]);
    r.epoch = static_cast<int>(number(f[3]));
    r.accuracy = number(f[4]);
    r.f1_macro = number(f[5]);
    r.auroc_macro = number(f[6]);
    r.rho = number(f[7]);
    r.model = f[8];
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_report(std::span<const ResultRecord> records) {
  std::string out = "## Results\n\n";
  out += "| rho | model | method | alpha | epoch | accuracy | F1 (macro) | AUROC (macro) |\n";
  out += "|---:|---|---|---:|---:|---:|---:|---:|\n";
  for (const ResultRecord& r : records)
    out += fmt::format("| {:.2f} | {} | {} | {} | {} | {:.2f}% | {:.4f} | {:.4f} |\n", r.rho, r.model,
                       r.method, r.alpha ? fmt::format("{:.2f}", *r.alpha) : "-", r.epoch,
                       100.0 * r.accuracy, r.f1_macro, r.auroc_macro);

  // Relative improvement of focal over cross-entropy, per rho, averaged over
  // the models that have both rows.
  std::map<double, std::map<std::string, std::pair<const ResultRecord*, const ResultRecord*>>> pairs;
  for (const ResultRecord& r : records) {
    auto& slot = pairs[round2(r.rho)][r.model];
    if (r.method == "focal") slot.first = &r;
    if (r.method == "cross_entropy") slot.second = &r;
  }
  std::string table;
  for (const auto& [rho, by_model] : pairs) {
    double acc = 0.0, f1 = 0.0, auroc = 0.0;
    int n = 0;
    for (const auto& [model, p] : by_model) {
      if (!p.first || !p.second) continue;
      auto rel = [](double focal, double ce) {
        return ce == 0.0 || std::isnan(focal) || std::isnan(ce) ? std::numeric_limits<double>::quiet_NaN()
                                                                : relative_improvement(focal, ce);
      };
      acc += rel(p.first->accuracy, p.second->accuracy);
      f1 += rel(p.first->f1_macro, p.second->f1_macro);
      auroc += rel(p.first->auroc_macro, p.second->auroc_macro);
      ++n;
    }
    if (n == 0) continue;
    table += fmt::format("| {:.2f} | {:+.2f}% | {:+.2f}% | {:+.2f}% | {} |\n", rho, acc / n, f1 / n,
                         auroc / n, n);
  }
  if (!table.empty()) {
    out += "\n## Relative improvement of focal loss over cross-entropy\n\n";
    out += "| rho | accuracy | F1 (macro) | AUROC (macro) | models |\n";
    out += "|---:|---:|---:|---:|---:|\n";
    out += table;
  }
  return out;
}

}  // namespace imbaclass
