#include "earnn/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "earnn/error.hpp"

namespace earnn {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'A', 'R', 'N', 'N', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(read_u64(in));
}

struct TensorView {
  std::string name;
  const double* data;
  double* mut;
  std::vector<int> shape;
  std::size_t size;
};

std::vector<TensorView> tensor_views(ModelParams& p) {
  std::vector<TensorView> views;
  auto mat = [&](const std::string& name, Mat& m) {
    views.push_back({name, m.data.data(), m.data.data(), {m.rows, m.cols}, m.size()});
  };
  auto vec = [&](const std::string& name, Vec& v) {
    views.push_back({name, v.data(), v.data(), {static_cast<int>(v.size())}, v.size()});
  };
  auto lstm = [&](const std::string& prefix, LstmParams& l) {
    mat(prefix + ".w_input", l.w_input);
    mat(prefix + ".w_forget", l.w_forget);
    mat(prefix + ".w_output", l.w_output);
    mat(prefix + ".w_candidate", l.w_candidate);
    vec(prefix + ".b_input", l.b_input);
    vec(prefix + ".b_forget", l.b_forget);
    vec(prefix + ".b_output", l.b_output);
    vec(prefix + ".b_candidate", l.b_candidate);
  };
  lstm("lstm_q", p.lstm_q);
  lstm("lstm_a", p.lstm_a);
  mat("bilinear_w", p.bilinear_w);
  mat("mlp_w1", p.mlp_w1);
  vec("mlp_b1", p.mlp_b1);
  vec("mlp_w2", p.mlp_w2);
  views.push_back({"mlp_b2", &p.mlp_b2, &p.mlp_b2, {1}, 1});
  mat("embeddings", p.embeddings.vectors);
  return views;
}

}  // namespace

void save_model(const std::string& path, const ModelBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path);

  ModelParams params = bundle.params;  // tensor_views needs mutable access
  const auto views = tensor_views(params);

  json manifest = json::array();
  for (const auto& v : views) manifest.push_back({{"name", v.name}, {"shape", v.shape}});
  const json header = {
      {"vocab", bundle.vocab.to_json()},
      {"variant", bundle.variant.name()},
      {"dims", {{"embed", params.dims.embed}, {"hidden", params.dims.hidden}, {"relevance", params.dims.relevance}}},
      {"h_decay", params.h_decay},
      {"margin", params.margin},
      {"embeddings_trainable", params.embeddings_trainable},
      {"meta", bundle.meta},
      {"tensors", manifest}};
  const std::string header_bytes = header.dump();

  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u64(out, header_bytes.size());
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (const auto& v : views) write_doubles(out, v.data, v.size);
  if (!out) throw IoError("failed while writing model file: " + path);
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a model file: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw ParseError("unsupported model version " + std::to_string(version) + ": " + path);

  const std::uint64_t header_len = read_u64(in);
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError("truncated model header: " + path);
  json header;
  try {
    header = json::parse(header_bytes);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad model header: ") + e.what());
  }

  ModelBundle bundle;
  bundle.vocab = Vocabulary::from_json(header.at("vocab"));
  bundle.variant = VariantConfig::parse(header.at("variant").get<std::string>());
  bundle.meta = header.value("meta", json::object());

  Dims dims;
  dims.embed = header.at("dims").at("embed").get<int>();
  dims.hidden = header.at("dims").at("hidden").get<int>();
  dims.relevance = header.at("dims").at("relevance").get<int>();

  EmbeddingTable table;
  table.vectors = Mat(bundle.vocab.size(), dims.embed);
  bundle.params = make_model_shape(dims, std::move(table));
  bundle.params.h_decay = header.at("h_decay").get<double>();
  bundle.params.margin = header.at("margin").get<double>();
  bundle.params.embeddings_trainable = header.at("embeddings_trainable").get<bool>();

  auto views = tensor_views(bundle.params);
  const json& manifest = header.at("tensors");
  if (manifest.size() != views.size()) throw ParseError("model tensor manifest mismatch: " + path);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != views[i].name)
      throw ParseError("unexpected tensor '" + entry.at("name").get<std::string>() + "' in " + path);
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape != views[i].shape)
      throw ParseError("tensor shape mismatch for '" + views[i].name + "' in " + path);
    read_doubles(in, views[i].mut, views[i].size);
  }
  if (!in) throw ParseError("truncated model tensors: " + path);
  return bundle;
}

}  // namespace earnn
