#include "core/io_util.hpp"
#include "core/model.hpp"

namespace cdt {

namespace {

constexpr char kMagic[9] = "CDTCKPT\0";
constexpr std::uint32_t kVersion = 1;

void write_matrix(std::ostream& os, const Matrix& m) {
  write_pod<std::uint64_t>(os, m.rows());
  write_pod<std::uint64_t>(os, m.cols());
  write_bytes(os, m.data(), m.size() * sizeof(double));
}

Matrix read_matrix(std::istream& is) {
  const auto rows = read_pod<std::uint64_t>(is, "checkpoint tensor rows");
  const auto cols = read_pod<std::uint64_t>(is, "checkpoint tensor cols");
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  read_bytes(is, m.data(), m.size() * sizeof(double),
             "checkpoint tensor data");
  return m;
}

}  // namespace

void save_model(const ModelParams& params, const std::string& path) {
  std::ofstream os = open_out(path);
  os.write(kMagic, 8);
  write_pod<std::uint32_t>(os, kVersion);
  const ModelConfig& c = params.cfg;
  write_pod<std::uint64_t>(os, c.patch_count);
  write_pod<std::uint64_t>(os, c.patch_dim);
  write_pod<std::uint64_t>(os, c.width);
  write_pod<std::uint64_t>(os, c.layers);
  write_pod<std::uint64_t>(os, c.heads);
  write_pod<std::uint64_t>(os, c.classes);
  write_pod<std::uint64_t>(os, c.mlp_hidden);
  write_pod<std::uint8_t>(os, c.use_cls_token ? 1 : 0);
  write_pod<double>(os, c.layernorm_eps);
  write_pod<std::uint64_t>(os, params.tensor_count());
  params.for_each_const([&](const Matrix& m) { write_matrix(os, m); });
  if (!os) fail(ErrorCode::io, "failed writing checkpoint " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, kMagic, "checkpoint");
  const auto version = read_pod<std::uint32_t>(is, "checkpoint version");
  if (version != kVersion) {
    fail(ErrorCode::bad_version,
         "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.patch_count = static_cast<std::size_t>(
      read_pod<std::uint64_t>(is, "checkpoint patch_count"));
  c.patch_dim = static_cast<std::size_t>(
      read_pod<std::uint64_t>(is, "checkpoint patch_dim"));
  c.width =
      static_cast<std::size_t>(read_pod<std::uint64_t>(is, "checkpoint width"));
  c.layers = static_cast<std::size_t>(
      read_pod<std::uint64_t>(is, "checkpoint layers"));
  c.heads =
      static_cast<std::size_t>(read_pod<std::uint64_t>(is, "checkpoint heads"));
  c.classes = static_cast<std::size_t>(
      read_pod<std::uint64_t>(is, "checkpoint classes"));
  c.mlp_hidden = static_cast<std::size_t>(
      read_pod<std::uint64_t>(is, "checkpoint mlp_hidden"));
  c.use_cls_token = read_pod<std::uint8_t>(is, "checkpoint cls flag") != 0;
  c.layernorm_eps = read_pod<double>(is, "checkpoint layernorm_eps");
  c.validate();

  Rng scratch(0);
  ModelParams params = ModelParams::init(c, scratch);
  const auto count = read_pod<std::uint64_t>(is, "checkpoint tensor count");
  if (count != params.tensor_count()) {
    fail(ErrorCode::bad_format,
         "checkpoint tensor count " + std::to_string(count) +
             " does not match config (" +
             std::to_string(params.tensor_count()) + ")");
  }
  params.for_each([&](Matrix& m) {
    Matrix read = read_matrix(is);
    if (!read.same_shape(m)) {
      fail(ErrorCode::bad_format, "checkpoint tensor shape " +
                                      read.shape_str() + ", expected " +
                                      m.shape_str());
    }
    m = std::move(read);
  });
  return params;
}

}  // namespace cdt
