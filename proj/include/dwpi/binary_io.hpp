#ifndef DWPI_BINARY_IO_HPP
#define DWPI_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace dwpi {

static_assert(std::endian::native == std::endian::little,
              "artifact formats are little-endian; big-endian hosts are not supported");

// Minimal little-endian writer for the versioned artifact formats.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);
  ~BinaryWriter();
  BinaryWriter(const BinaryWriter&) = delete;
  BinaryWriter& operator=(const BinaryWriter&) = delete;

  void magic(std::string_view tag);
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(std::span<const double> v) { raw(v.data(), v.size_bytes()); }
  void close();

 private:
  void raw(const void* p, std::size_t n);
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<double> f64s(std::size_t n);
  // Throws unless the whole file has been consumed.
  void expect_end();

 private:
  void raw(void* p, std::size_t n);
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace dwpi

#endif  // DWPI_BINARY_IO_HPP
