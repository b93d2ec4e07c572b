#include "exgrg/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "exgrg/error.hpp"

namespace exgrg {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'X', 'G', 'R', 'G', '0', '1', '\0'};
// Guards against absurd lengths in corrupt files before allocating.
constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 40;

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return v;
  }

  std::string text(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t position() const noexcept { return pos_; }

 private:
  void need(std::uint64_t n, const char* what) {
    if (n > kMaxLength || pos_ + n > bytes_.size())
      throw DataError("checkpoint '" + path_.string() + "' is truncated while reading " + what +
                      " at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::filesystem::path path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out(kMagic.begin(), kMagic.end());
  put_u64(out, ckpt.config_text.size());
  out += ckpt.config_text;
  put_u64(out, ckpt.iteration);
  put_u64(out, ckpt.entries.size());
  for (const auto& e : ckpt.entries) {
    put_u64(out, e.name.size());
    out += e.name;
    put_u64(out, e.value.rows());
    put_u64(out, e.value.cols());
    for (double v : e.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint '" + tmp.string() + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("failed writing checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), 5) != 0)
    throw DataError("'" + path.string() + "' is not an exgrg checkpoint (bad magic)");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw DataError("checkpoint '" + path.string() + "' has unsupported format version '" +
                    bytes.substr(5, 2) + "' (expected 01)");
  Reader r(bytes, path);
  r.text(kMagic.size(), "magic");
  Checkpoint ckpt;
  ckpt.config_text = r.text(r.u64("config length"), "config text");
  ckpt.iteration = r.u64("iteration");
  const std::uint64_t count = r.u64("entry count");
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedMatrix e;
    e.name = r.text(r.u64("name length"), "entry name");
    const std::uint64_t rows = r.u64("rows");
    const std::uint64_t cols = r.u64("cols");
    if (cols != 0 && rows > kMaxLength / cols)
      throw DataError("checkpoint entry '" + e.name + "' has implausible shape");
    std::vector<double> values(rows * cols);
    for (double& v : values) v = r.f64("matrix values");
    e.value = Matrix(rows, cols, std::move(values));
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.at_end())
    throw DataError("checkpoint '" + path.string() + "' has trailing bytes after entry " +
                    std::to_string(count));
  return ckpt;
}

}  // namespace exgrg
