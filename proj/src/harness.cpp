#include "signsym/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "signsym/binary_io.hpp"
#include "signsym/parallel.hpp"
#include "signsym/retrieval.hpp"
#include "signsym/rng.hpp"

namespace signsym {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number '" + text + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a non-negative integer '" + text + "'");
  }
}

std::string_view name(Task task) { return task == Task::classification ? "classification" : "hashing"; }
std::string_view name(AttackTransport t) { return t == AttackTransport::backprop ? "backprop" : "deployed"; }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& to_text) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += to_text(items[i]);
  }
  return out;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void ExperimentConfig::validate() const {
  parse_architecture(model);
  if (finetune_rules.empty()) throw ConfigError("finetune-rules must name at least one rule");
  if (attacks.empty()) throw ConfigError("attacks must name at least one attack");
  if (epsilons.empty()) throw ConfigError("epsilons must not be empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (epsilons[i] < 0) throw ConfigError("epsilons must be non-negative");
    if (i && !(epsilons[i] > epsilons[i - 1])) throw ConfigError("epsilons must be strictly increasing");
  }
  if (task == Task::classification && epsilons.front() != 0)
    throw ConfigError("classification epsilon sweeps must start at 0");
  for (auto a : attacks) {
    if (task == Task::classification && a == AttackFamily::hag)
      throw ConfigError("HAG attacks a hasher head; task is classification");
    if (task == Task::hashing && a != AttackFamily::hag)
      throw ConfigError(std::string(name(a)) + " attacks a classifier head; task is hashing");
  }
  if (batch_size == 0) throw ConfigError("batch-size must be positive");
  if (eval_count == 0) throw ConfigError("n-eval must be positive");
  if (code_bits == 0) throw ConfigError("code-bits must be positive");
  if (map_k == 0) throw ConfigError("map-k must be positive");
  if (!(alpha_ratio > 0)) throw ConfigError("alpha-ratio must be positive");
  if (attack_steps == 0) throw ConfigError("attack-steps must be positive");
  if (query_budget == 0) throw ConfigError("query-budget must be positive");
  if (!(lr_pretrain >= 0 && lr_backbone >= 0 && lr_head >= 0)) throw ConfigError("learning rates must be >= 0");
  if ((data.name == DatasetName::mnist || data.name == DatasetName::cifar10) && data.dir.empty())
    throw ConfigError("data-dir is required for " + std::string(name(data.name)));
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const std::string where = "config key '" + key + "'";
    if (key == "task") {
      if (value == "classification") cfg.task = Task::classification;
      else if (value == "hashing") cfg.task = Task::hashing;
      else throw ConfigError(where + ": unknown task '" + value + "'");
    } else if (key == "dataset") {
      cfg.data.name = parse_dataset(value);
    } else if (key == "data-dir") {
      cfg.data.dir = value;
    } else if (key == "model") {
      cfg.model = value;
    } else if (key == "pretrain-rule") {
      cfg.pretrain_rule = parse_rule(value);
    } else if (key == "finetune-rules") {
      cfg.finetune_rules.clear();
      for (const auto& r : split(value, ',')) cfg.finetune_rules.push_back(parse_rule(r));
    } else if (key == "pretrain-epochs") {
      cfg.pretrain_epochs = parse_unsigned(value, where);
    } else if (key == "finetune-epochs") {
      cfg.finetune_epochs = parse_unsigned(value, where);
    } else if (key == "batch-size") {
      cfg.batch_size = parse_unsigned(value, where);
    } else if (key == "lr-pretrain") {
      cfg.lr_pretrain = parse_double(value, where);
    } else if (key == "lr-backbone") {
      cfg.lr_backbone = parse_double(value, where);
    } else if (key == "lr-head") {
      cfg.lr_head = parse_double(value, where);
    } else if (key == "attacks") {
      cfg.attacks.clear();
      for (const auto& a : split(value, ',')) cfg.attacks.push_back(parse_attack(a));
    } else if (key == "epsilons") {
      cfg.epsilons.clear();
      for (const auto& e : split(value, ',')) cfg.epsilons.push_back(parse_double(e, where));
    } else if (key == "alpha-ratio") {
      cfg.alpha_ratio = parse_double(value, where);
    } else if (key == "attack-steps") {
      cfg.attack_steps = parse_unsigned(value, where);
    } else if (key == "query-budget") {
      cfg.query_budget = parse_unsigned(value, where);
    } else if (key == "n-eval") {
      cfg.eval_count = parse_unsigned(value, where);
    } else if (key == "train-limit") {
      cfg.train_limit = parse_unsigned(value, where);
    } else if (key == "code-bits") {
      cfg.code_bits = parse_unsigned(value, where);
    } else if (key == "map-k") {
      cfg.map_k = parse_unsigned(value, where);
    } else if (key == "attack-transport") {
      if (value == "backprop" || value == "bp") cfg.transport = AttackTransport::backprop;
      else if (value == "deployed") cfg.transport = AttackTransport::deployed;
      else throw ConfigError(where + ": expected backprop or deployed");
    } else if (key == "seed") {
      cfg.seed = parse_unsigned(value, where);
    } else if (key == "blobs-classes") {
      cfg.data.blobs.classes = parse_unsigned(value, where);
    } else if (key == "blobs-dim") {
      cfg.data.blobs.dim = parse_unsigned(value, where);
    } else if (key == "blobs-train-per-class") {
      cfg.data.blobs.train_per_class = parse_unsigned(value, where);
    } else if (key == "blobs-test-per-class") {
      cfg.data.blobs.test_per_class = parse_unsigned(value, where);
    } else if (key == "blobs-spread") {
      cfg.data.blobs.spread = parse_double(value, where);
    } else {
      throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  cfg.data.blobs.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

namespace {

std::string serialize_without_seed(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "task = " << name(cfg.task) << '\n'
     << "dataset = " << name(cfg.data.name) << '\n';
  if (!cfg.data.dir.empty()) os << "data-dir = " << cfg.data.dir << '\n';
  os << "model = " << cfg.model << '\n'
     << "pretrain-rule = " << name(cfg.pretrain_rule) << '\n'
     << "finetune-rules = " << join(cfg.finetune_rules, [](FeedbackRule r) { return std::string(name(r)); }) << '\n'
     << "pretrain-epochs = " << cfg.pretrain_epochs << '\n'
     << "finetune-epochs = " << cfg.finetune_epochs << '\n'
     << "batch-size = " << cfg.batch_size << '\n'
     << "lr-pretrain = " << format_double(cfg.lr_pretrain) << '\n'
     << "lr-backbone = " << format_double(cfg.lr_backbone) << '\n'
     << "lr-head = " << format_double(cfg.lr_head) << '\n'
     << "attacks = " << join(cfg.attacks, [](AttackFamily a) { return std::string(name(a)); }) << '\n'
     << "epsilons = " << join(cfg.epsilons, format_double) << '\n'
     << "alpha-ratio = " << format_double(cfg.alpha_ratio) << '\n'
     << "attack-steps = " << cfg.attack_steps << '\n'
     << "query-budget = " << cfg.query_budget << '\n'
     << "n-eval = " << cfg.eval_count << '\n'
     << "train-limit = " << cfg.train_limit << '\n'
     << "code-bits = " << cfg.code_bits << '\n'
     << "map-k = " << cfg.map_k << '\n'
     << "attack-transport = " << name(cfg.transport) << '\n'
     << "blobs-classes = " << cfg.data.blobs.classes << '\n'
     << "blobs-dim = " << cfg.data.blobs.dim << '\n'
     << "blobs-train-per-class = " << cfg.data.blobs.train_per_class << '\n'
     << "blobs-test-per-class = " << cfg.data.blobs.test_per_class << '\n'
     << "blobs-spread = " << format_double(cfg.data.blobs.spread) << '\n';
  return os.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
  return serialize_without_seed(cfg) + "seed = " + std::to_string(cfg.seed) + '\n';
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize_without_seed(cfg))));
  return buf;
}

// --- CSV / SVG --------------------------------------------------------------

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.config_hash + ',' + r.rule + ',' + r.attack + ',' + format_double(r.epsilon) + ',' +
           format_double(r.clean) + ',' + format_double(r.robust) + ',' + std::to_string(r.n_eval) + ',' +
           format_double(r.wall_time_s) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

std::vector<RunRecord> records_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) throw FormatError("records CSV: missing or wrong header");
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9)
      throw FormatError("records CSV line " + std::to_string(line_no) + ": expected 9 fields, found " +
                        std::to_string(f.size()));
    try {
      RunRecord r;
      r.config_hash = f[0];
      r.rule = f[1];
      r.attack = f[2];
      r.epsilon = parse_double(f[3], "epsilon");
      r.clean = parse_double(f[4], "clean");
      r.robust = parse_double(f[5], "robust");
      r.n_eval = parse_unsigned(f[6], "n_eval");
      r.wall_time_s = parse_double(f[7], "wall_time_s");
      r.seed = parse_unsigned(f[8], "seed");
      out.push_back(std::move(r));
    } catch (const ConfigError& e) {
      throw FormatError("records CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
  if (records.empty()) throw ConfigError("emit_csv: no records");
  io::write_file(path, records_to_csv(records));
}

std::vector<RunRecord> read_csv(const std::string& path) { return records_from_csv(io::read_file(path)); }

std::string records_to_svg(const std::vector<RunRecord>& records, std::string_view title) {
  if (records.empty()) throw ConfigError("emit_svg_plot: no records");
  constexpr double width = 640, height = 400, left = 60, right = 140, top = 40, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;

  double min_pos = std::numeric_limits<double>::infinity(), max_eps = 0;
  for (const auto& r : records) {
    if (r.epsilon > 0) min_pos = std::min(min_pos, r.epsilon);
    max_eps = std::max(max_eps, r.epsilon);
  }
  const double zero_at = std::isfinite(min_pos) ? std::log10(min_pos) - 1.0 : 0.0;
  auto log_x = [&](double eps) { return eps > 0 ? std::log10(eps) : zero_at; };
  double x_lo = zero_at, x_hi = max_eps > 0 ? std::log10(max_eps) : zero_at;
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 1;
    x_hi += 1;
  }
  auto px = [&](double eps) { return left + (log_x(eps) - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double metric) { return top + (1.0 - std::clamp(metric, 0.0, 1.0)) * plot_h; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::vector<std::string> rules;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& r : records) {
    if (!series.count(r.rule)) rules.push_back(r.rule);
    series[r.rule].emplace_back(r.epsilon, r.robust);
  }
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  os << "<g stroke=\"black\"><line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\""
     << num(left + plot_w) << "\" y2=\"" << num(top + plot_h) << "\"/><line x1=\"" << num(left) << "\" y1=\""
     << num(top) << "\" x2=\"" << num(left) << "\" y2=\"" << num(top + plot_h) << "\"/></g>\n";
  for (double m : {0.0, 0.25, 0.5, 0.75, 1.0})
    os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(m) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
       << m << "</text>\n";
  std::vector<double> ticks;
  for (const auto& r : records)
    if (std::find(ticks.begin(), ticks.end(), r.epsilon) == ticks.end()) ticks.push_back(r.epsilon);
  for (double e : ticks)
    os << "<text x=\"" << num(px(e)) << "\" y=\"" << num(top + plot_h + 16) << "\" text-anchor=\"middle\" font-size=\"10\">"
       << e << "</text>\n";
  os << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 10)
     << "\" text-anchor=\"middle\" font-size=\"12\">epsilon (log scale)</text>\n";

  for (std::size_t i = 0; i < rules.size(); ++i) {
    auto pts = series[rules[i]];
    std::stable_sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first < b.first; });
    const char* color = colors[i % std::size(colors)];
    os << "<polyline data-rule=\"" << rules[i] << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < pts.size(); ++j) os << (j ? " " : "") << num(px(pts[j].first)) << ',' << num(py(pts[j].second));
    os << "\"/>\n";
    os << "<text x=\"" << num(left + plot_w + 12) << "\" y=\"" << num(top + 16 + 18.0 * static_cast<double>(i))
       << "\" fill=\"" << color << "\" font-size=\"12\">" << rules[i] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_svg_plot(const std::vector<RunRecord>& records, const std::string& path) {
  std::string title = records.empty() ? std::string() : records.front().attack;
  io::write_file(path, records_to_svg(records, title));
}

// --- pipeline ---------------------------------------------------------------

namespace {

constexpr std::uint64_t kPretrainFeedback = 0x91, kPretrainShuffle = 0x92, kFreshHead = 0x93,
                        kFinetuneFeedback = 0x94, kFinetuneShuffle = 0x95, kEvalRows = 0x96, kBlackBox = 0x97;
constexpr std::size_t kEvalChunk = 50;

Shape example_shape(const Tensor& inputs) { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }

std::vector<LabelSet> label_sets(const std::vector<int>& labels) {
  std::vector<LabelSet> out;
  for (int l : labels) out.push_back(single_label(l));
  return out;
}

/// Applies `attack` to fixed-size row chunks and reassembles the batch.
template <typename Attack>
Tensor attack_in_chunks(const Tensor& inputs, Attack&& attack) {
  const std::size_t n = inputs.rows();
  const std::size_t chunks = (n + kEvalChunk - 1) / kEvalChunk;
  std::vector<Tensor> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = c * kEvalChunk; i < std::min(n, (c + 1) * kEvalChunk); ++i) rows.push_back(i);
    parts[c] = attack(gather_rows(inputs, rows), rows);
  });
  Tensor out(inputs.shape());
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy_n(p.data(), p.size(), out.data() + offset);
    offset += p.size();
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

}  // namespace

double accuracy(const Network& net, const Tensor& inputs, const std::vector<int>& labels) {
  if (labels.empty()) return 0;
  const auto predicted = predict_labels(net, inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

Dataset load_train(const ExperimentConfig& cfg) {
  DatasetSource src = cfg.data;
  src.blobs.seed = cfg.seed;
  return load_dataset(src, Split::train).head(cfg.train_limit);
}

Dataset load_test(const ExperimentConfig& cfg) {
  DatasetSource src = cfg.data;
  src.blobs.seed = cfg.seed;
  return load_dataset(src, Split::test);
}

std::string checkpoint_name(FeedbackRule rule) { return "finetuned-" + std::string(name(rule)) + ".ckpt"; }

Checkpoint pretrain_stage(const ExperimentConfig& cfg, const Dataset& train) {
  cfg.validate();
  Network net = make_network(example_shape(train.inputs), parse_architecture(cfg.model), Head::classifier(train.classes),
                             cfg.seed);
  FeedbackState state = FeedbackState::create(net, cfg.pretrain_rule, stream_id(cfg.seed, kPretrainFeedback));
  TrainOptions options;
  options.epochs = cfg.pretrain_epochs;
  options.batch_size = cfg.batch_size;
  options.lr = {cfg.lr_pretrain, cfg.lr_pretrain};
  options.seed = stream_id(cfg.seed, kPretrainShuffle);
  signsym::train(net, state, train.inputs, train.label_tensor(), LossKind::cross_entropy, options);
  return Checkpoint{std::move(net), std::move(state)};
}

Checkpoint finetune_stage(const ExperimentConfig& cfg, const Checkpoint& pretrained, FeedbackRule rule,
                          const Dataset& train) {
  cfg.validate();
  const Head head = cfg.task == Task::classification ? Head::classifier(train.classes) : Head::hasher(cfg.code_bits);
  const LossKind loss_kind = cfg.task == Task::classification ? LossKind::cross_entropy : LossKind::pairwise_hash;
  Network net = with_fresh_head(pretrained.net, head, stream_id(cfg.seed, kFreshHead));
  FeedbackState state = FeedbackState::create(net, rule, stream_id(cfg.seed, kFinetuneFeedback));
  TrainOptions options;
  options.epochs = cfg.finetune_epochs;
  options.batch_size = cfg.batch_size;
  options.lr = {cfg.lr_backbone, cfg.lr_head};
  options.seed = stream_id(cfg.seed, kFinetuneShuffle);
  signsym::train(net, state, train.inputs, train.label_tensor(), loss_kind, options);
  return Checkpoint{std::move(net), std::move(state)};
}

std::vector<std::size_t> evaluation_rows(const ExperimentConfig& cfg, std::size_t test_size) {
  std::vector<std::size_t> rows(test_size);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  SeededRng rng(cfg.seed, kEvalRows);
  rng.shuffle(std::span<std::size_t>(rows));
  rows.resize(std::min(cfg.eval_count, test_size));
  std::sort(rows.begin(), rows.end());
  return rows;
}

GradientModel attack_model(const ExperimentConfig& cfg, const Checkpoint& ckpt) {
  if (cfg.transport == AttackTransport::backprop || !ckpt.feedback) return GradientModel::backprop(ckpt.net);
  return GradientModel(ckpt.net, ckpt.feedback->rule, *ckpt.feedback);
}

std::vector<RunRecord> attack_stage(const ExperimentConfig& cfg, const Checkpoint& finetuned, const Dataset& database,
                                    const Dataset& test) {
  cfg.validate();
  const Network& net = finetuned.net;
  const std::string rule = finetuned.feedback ? std::string(name(finetuned.feedback->rule)) : "BP";
  const Dataset eval = test.subset(evaluation_rows(cfg, test.size()));
  const GradientModel model = attack_model(cfg, finetuned);
  const std::string hash = config_hash(cfg);

  std::vector<RunRecord> records;
  auto record = [&](AttackFamily attack, double eps, double clean, double robust, double seconds) {
    records.push_back(RunRecord{hash, rule, std::string(name(attack)), eps, clean, robust, eval.size(), seconds,
                                cfg.seed});
  };

  if (cfg.task == Task::hashing) {
    if (net.head().kind != Head::Kind::hasher) throw ConfigError("hashing evaluation needs a hasher head");
    const RetrievalIndex index =
        RetrievalIndex::from_rows(predict_scores(net, database.inputs), label_sets(database.labels));
    auto queries_for = [&](const Tensor& inputs) {
      std::vector<Query> queries;
      const auto codes = codes_from_rows(predict_scores(net, inputs));
      for (std::size_t i = 0; i < codes.size(); ++i) queries.push_back({codes[i], single_label(eval.labels[i])});
      return queries;
    };
    const double clean = map_at_k(queries_for(eval.inputs), index, cfg.map_k);
    for (auto attack : cfg.attacks)
      for (double eps : cfg.epsilons) {
        const auto start = Clock::now();
        double robust = clean;
        if (eps > 0) {
          AttackSpec spec{attack, eps, eps * cfg.alpha_ratio, cfg.attack_steps, cfg.query_budget, 0.0, 1.0, cfg.seed};
          const Tensor adv = attack_in_chunks(eval.inputs, [&](const Tensor& x, const std::vector<std::size_t>&) {
            return hag(model, x, spec).x_adv;
          });
          robust = map_at_k(queries_for(adv), index, cfg.map_k);
        }
        record(attack, eps, clean, robust, seconds_since(start));
      }
    return records;
  }

  if (net.head().kind != Head::Kind::classifier) throw ConfigError("classification evaluation needs a classifier head");
  const auto predicted = predict_labels(net, eval.inputs);
  std::vector<bool> correct(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) correct[i] = predicted[i] == eval.labels[i];
  const double clean = accuracy(net, eval.inputs, eval.labels);
  const double n = static_cast<double>(eval.size());

  for (auto attack : cfg.attacks) {
    if (is_white_box(attack)) {
      for (double eps : cfg.epsilons) {
        const auto start = Clock::now();
        double robust = clean;
        if (eps > 0) {
          AttackSpec spec{attack, eps, eps * cfg.alpha_ratio, cfg.attack_steps, cfg.query_budget, 0.0, 1.0, cfg.seed};
          const Tensor adv = attack_in_chunks(eval.inputs, [&](const Tensor& x, const std::vector<std::size_t>& rows) {
            const auto labels = gather_labels(eval.labels, rows);
            return attack == AttackFamily::fgsm ? fgsm(model, x, labels, spec).x_adv : pgd(model, x, labels, spec).x_adv;
          });
          robust = accuracy(net, adv, eval.labels);
        }
        record(attack, eps, clean, robust, seconds_since(start));
      }
      continue;
    }
    // decision-based: one minimal-perturbation run per correctly classified
    // input; an input counts as robust at ε while its best adversarial lies
    // farther than ε in RMS distance (‖δ‖₂/√d).
    const auto start = Clock::now();
    const NetworkLabelOracle oracle(net);
    std::vector<double> rms(eval.size(), 0.0);
    const double sqrt_d = std::sqrt(static_cast<double>(eval.inputs.cols()));
    parallel_for(eval.size(), [&](std::size_t i) {
      if (!correct[i]) return;
      AttackSpec spec{attack, 0.0, 0.0, 1, cfg.query_budget, 0.0, 1.0, stream_id(cfg.seed, stream_id(kBlackBox, i))};
      const Tensor x = gather_rows(eval.inputs, {i});
      try {
        const auto r = attack == AttackFamily::boundary ? boundary_attack(oracle, x, eval.labels[i], spec)
                                                        : hsja(oracle, x, eval.labels[i], spec);
        rms[i] = r.achieved_l2 / sqrt_d;
      } catch (const StartNotFoundError&) {
        rms[i] = std::numeric_limits<double>::infinity();
      }
    });
    const double seconds = seconds_since(start);
    for (double eps : cfg.epsilons) {
      std::size_t robust = 0;
      for (std::size_t i = 0; i < eval.size(); ++i) robust += correct[i] && rms[i] > eps;
      record(attack, eps, clean, static_cast<double>(robust) / n, seconds);
    }
  }
  return records;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const Dataset train = load_train(cfg);
  const Dataset test = load_test(cfg);
  PipelineResult result;
  result.pretrained = pretrain_stage(cfg, train);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_checkpoint((std::filesystem::path(out_dir) / "pretrained.ckpt").string(), result.pretrained);
  }
  for (auto rule : cfg.finetune_rules) {
    Checkpoint ft = finetune_stage(cfg, result.pretrained, rule, train);
    if (!out_dir.empty()) save_checkpoint((std::filesystem::path(out_dir) / checkpoint_name(rule)).string(), ft);
    auto records = attack_stage(cfg, ft, train, test);
    result.records.insert(result.records.end(), records.begin(), records.end());
    result.finetuned.push_back(std::move(ft));
  }
  if (!out_dir.empty()) emit_csv(result.records, (std::filesystem::path(out_dir) / "records.csv").string());
  return result;
}

}  // namespace signsym
