#include "groupface/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iterator>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"

namespace groupface {

namespace {

constexpr char kMatrixMagic[8] = {'G', 'F', 'M', 'A', 'T', 'R', 'I', 'X'};
constexpr std::uint32_t kMatrixVersion = 1;

void normalize(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  for (double& x : v) x /= n;
}

std::vector<double> gaussian_vector(std::size_t dim, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> v(dim);
  for (double& x : v) x = dist(rng);
  return v;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path + " for reading");
  return in;
}

}  // namespace

void SyntheticDataConfig::validate() const {
  if (num_identities == 0 || samples_per_identity == 0 || input_dim == 0 || num_latent_groups == 0) {
    throw std::invalid_argument("synthetic data counts must be positive");
  }
  if (num_identities < 2 * num_latent_groups) {
    throw std::invalid_argument("synthetic data needs num_identities >= 2 * num_latent_groups");
  }
  if (eval_identities == 0 || eval_identities + 2 > num_identities) {
    throw std::invalid_argument("eval_identities must leave at least 2 training identities and be positive");
  }
  if (!(identity_noise > 0.0) || !(group_spread > 0.0)) {
    throw std::invalid_argument("synthetic noise levels must be positive");
  }
}

SyntheticDataConfig SyntheticDataConfig::from_config(KeyValueConfig& kv) {
  SyntheticDataConfig cfg;
  cfg.num_identities = kv.get_size("num_identities", cfg.num_identities);
  cfg.eval_identities = kv.get_size("eval_identities", cfg.eval_identities);
  cfg.samples_per_identity = kv.get_size("samples_per_identity", cfg.samples_per_identity);
  cfg.input_dim = kv.get_size("input_dim", cfg.input_dim);
  cfg.num_latent_groups = kv.get_size("num_latent_groups", cfg.num_latent_groups);
  cfg.identity_noise = kv.get_double("identity_noise", cfg.identity_noise);
  cfg.group_spread = kv.get_double("group_spread", cfg.group_spread);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  return cfg;
}

Dataset generate_synthetic_dataset(const SyntheticDataConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const std::size_t dim = cfg.input_dim;

  std::vector<std::vector<double>> group_centers;
  for (std::size_t g = 0; g < cfg.num_latent_groups; ++g) {
    group_centers.push_back(gaussian_vector(dim, 1.0, rng));
    normalize(group_centers.back());
  }

  std::vector<std::vector<double>> identity_centers;
  std::vector<std::uint32_t> identity_group;
  for (std::size_t id = 0; id < cfg.num_identities; ++id) {
    const std::size_t g = id % cfg.num_latent_groups;
    auto center = gaussian_vector(dim, cfg.group_spread, rng);
    for (std::size_t d = 0; d < dim; ++d) center[d] += group_centers[g][d];
    normalize(center);
    identity_centers.push_back(std::move(center));
    identity_group.push_back(static_cast<std::uint32_t>(g));
  }

  std::vector<std::uint32_t> order(cfg.num_identities);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_eval(cfg.num_identities, false);
  for (std::size_t i = 0; i < cfg.eval_identities; ++i) is_eval[order[i]] = true;

  std::vector<double> train_values, eval_values;
  Dataset data;
  for (std::size_t id = 0; id < cfg.num_identities; ++id) {
    auto& values = is_eval[id] ? eval_values : train_values;
    auto& split = is_eval[id] ? data.eval : data.train;
    for (std::size_t s = 0; s < cfg.samples_per_identity; ++s) {
      const auto noise = gaussian_vector(dim, cfg.identity_noise, rng);
      for (std::size_t d = 0; d < dim; ++d) values.push_back(identity_centers[id][d] + noise[d]);
      split.identities.push_back(static_cast<std::uint32_t>(id));
      split.groups.push_back(identity_group[id]);
    }
  }
  data.train.features = Tensor({data.train.size(), dim}, std::move(train_values));
  data.eval.features = Tensor({data.eval.size(), dim}, std::move(eval_values));
  return data;
}

void check_disjoint_identities(const Dataset& data) {
  std::vector<std::uint32_t> train(data.train.identities), eval(data.eval.identities);
  std::sort(train.begin(), train.end());
  std::sort(eval.begin(), eval.end());
  std::vector<std::uint32_t> shared;
  std::set_intersection(train.begin(), train.end(), eval.begin(), eval.end(), std::back_inserter(shared));
  if (!shared.empty()) {
    throw std::invalid_argument("identity " + std::to_string(shared.front()) + " appears in both train and eval splits");
  }
}

void write_matrix_file(const std::string& path, const Tensor& rows, ValueType type) {
  auto out = open_for_write(path);
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  detail::write_le(out, kMatrixVersion);
  detail::write_le(out, static_cast<std::uint32_t>(type));
  detail::write_le(out, static_cast<std::uint64_t>(rows.rows()));
  detail::write_le(out, static_cast<std::uint32_t>(rows.cols()));
  for (double v : rows.data()) {
    if (type == ValueType::f32) detail::write_f32(out, static_cast<float>(v));
    else detail::write_f64(out, v);
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

Tensor read_matrix_file(const std::string& path) {
  auto in = open_for_read(path);
  char magic[sizeof kMatrixMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw std::runtime_error(path + ": not a matrix file (bad magic)");
  }
  const auto version = detail::read_le<std::uint32_t>(in, path);
  if (version != kMatrixVersion) throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  const auto type = static_cast<ValueType>(detail::read_le<std::uint32_t>(in, path));
  if (type != ValueType::f32 && type != ValueType::f64) throw std::runtime_error(path + ": unknown value type");
  const auto count = detail::read_le<std::uint64_t>(in, path);
  const auto dim = detail::read_le<std::uint32_t>(in, path);
  if (count == 0 || dim == 0) throw std::runtime_error(path + ": empty matrix");
  std::vector<double> values(count * dim);
  for (auto& v : values) v = type == ValueType::f32 ? detail::read_f32(in, path) : detail::read_f64(in, path);
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path + ": trailing bytes after matrix");
  return Tensor({static_cast<std::size_t>(count), dim}, std::move(values));
}

void write_label_file(const std::string& path, const Labels& labels) {
  auto out = open_for_write(path);
  for (auto label : labels) detail::write_le(out, label);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Labels read_label_file(const std::string& path) {
  auto in = open_for_read(path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % 4 != 0) throw std::runtime_error(path + ": size is not a multiple of 4 bytes");
  Labels labels(bytes / 4);
  for (auto& label : labels) label = detail::read_le<std::uint32_t>(in, path);
  return labels;
}

void write_dataset(const std::string& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, split] : {std::pair<std::string, const Split*>{"train", &data.train}, {"eval", &data.eval}}) {
    const std::string features = name + ".features.bin";
    const std::string identity = name + ".identity.u32";
    const std::string group = name + ".group.u32";
    write_matrix_file(dir + "/" + features, split->features, ValueType::f32);
    write_label_file(dir + "/" + identity, split->identities);
    write_label_file(dir + "/" + group, split->groups);
    files.push_back({{"path", features}, {"split", name}, {"role", "features"}, {"records", split->size()}});
    files.push_back({{"path", identity}, {"split", name}, {"role", "identity_labels"}, {"records", split->size()}});
    files.push_back({{"path", group}, {"split", name}, {"role", "latent_group_labels"}, {"records", split->size()}});
  }
  const nlohmann::json sidecar = {{"format", "groupface-dataset"},
                                  {"version", 1},
                                  {"input_dim", data.train.features.cols()},
                                  {"files", files}};
  std::ofstream out(dir + "/dataset.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/dataset.json");
  out << sidecar.dump(2) << '\n';
}

Dataset read_dataset(const std::string& dir) {
  std::ifstream in(dir + "/dataset.json");
  if (!in) throw std::runtime_error("cannot open " + dir + "/dataset.json");
  const auto sidecar = nlohmann::json::parse(in);
  if (sidecar.value("format", "") != "groupface-dataset") throw std::runtime_error(dir + ": not a dataset directory");

  Dataset data;
  for (const auto& entry : sidecar.at("files")) {
    const std::string path = dir + "/" + entry.at("path").get<std::string>();
    const std::string split_name = entry.at("split").get<std::string>();
    const std::string role = entry.at("role").get<std::string>();
    Split& split = split_name == "train" ? data.train : data.eval;
    if (role == "features") split.features = read_matrix_file(path);
    else if (role == "identity_labels") split.identities = read_label_file(path);
    else if (role == "latent_group_labels") split.groups = read_label_file(path);
    else throw std::runtime_error(dir + ": unknown file role '" + role + "'");
  }
  for (const Split* split : {&data.train, &data.eval}) {
    if (!split->features.defined() || split->identities.size() != split->features.rows() ||
        split->groups.size() != split->identities.size()) {
      throw std::runtime_error(dir + ": incomplete or inconsistent split files");
    }
  }
  return data;
}

Dataset round_trip_precision(Dataset data) {
  for (Split* split : {&data.train, &data.eval}) {
    for (auto& v : split->features.data()) v = static_cast<double>(static_cast<float>(v));
  }
  return data;
}

}  // namespace groupface
