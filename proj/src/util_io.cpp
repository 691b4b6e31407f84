#include "vdn/util/binary_io.hpp"
#include "vdn/util/parallel.hpp"
#include "vdn/util/pgm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace vdn {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace io {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::vector<char>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

std::uint16_t quantize_unit(double value, std::uint16_t max) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(value, 0.0, 1.0) * max));
}

namespace {
std::vector<char> pgm_header(Eigen::Index w, Eigen::Index h, int max) {
  std::ostringstream s;
  s << "P5\n" << w << ' ' << h << '\n' << max << '\n';
  const std::string str = s.str();
  return std::vector<char>(str.begin(), str.end());
}
}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage8& image) {
  auto bytes = pgm_header(image.cols(), image.rows(), 255);
  bytes.insert(bytes.end(), image.data(), image.data() + image.size());
  write_file(path, bytes);
}

void write_pgm(const std::filesystem::path& path, const GrayImage16& image) {
  auto bytes = pgm_header(image.cols(), image.rows(), 65535);
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    bytes.push_back(static_cast<char>(image.data()[i] >> 8));
    bytes.push_back(static_cast<char>(image.data()[i] & 0xff));
  }
  write_file(path, bytes);
}

PgmImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&] {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) t += bytes[pos++];
    return t;
  };
  if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM");
  PgmImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    img.max_value = std::stoi(token());
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t sample_bytes = img.max_value > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (bytes.size() - pos != count * sample_bytes) throw FormatError(path.string() + ": PGM raster size mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + i * sample_bytes]);
    img.samples.push_back(sample_bytes == 1
                              ? hi
                              : static_cast<std::uint16_t>(
                                    (hi << 8) | static_cast<unsigned char>(bytes[pos + i * sample_bytes + 1])));
  }
  return img;
}

}  // namespace io
}  // namespace vdn
