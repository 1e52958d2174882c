#include "asu/digest.hpp"

#include <array>
#include <cstdint>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "asu/error.hpp"

namespace asu {

namespace {

EVP_MD_CTX* as_ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }

}  // namespace

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(as_ctx(ctx_), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::io, "sha256 initialization failed");
  }
}

Sha256::~Sha256() { EVP_MD_CTX_free(as_ctx(ctx_)); }

Sha256& Sha256::update(std::span<const unsigned char> bytes) {
  EVP_DigestUpdate(as_ctx(ctx_), bytes.data(), bytes.size());
  return *this;
}

Sha256& Sha256::update(std::string_view text) {
  EVP_DigestUpdate(as_ctx(ctx_), text.data(), text.size());
  return *this;
}

Sha256& Sha256::update(const Eigen::MatrixXd& matrix) {
  const std::array<std::int64_t, 2> shape{matrix.rows(), matrix.cols()};
  EVP_DigestUpdate(as_ctx(ctx_), shape.data(), sizeof(shape));
  EVP_DigestUpdate(as_ctx(ctx_), matrix.data(), sizeof(double) * static_cast<std::size_t>(matrix.size()));
  return *this;
}

std::string Sha256::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(as_ctx(ctx_), out.data(), &len);
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", out[i]);
  return hex;
}

std::string sha256_hex(std::string_view text) { return Sha256().update(text).hex(); }

}  // namespace asu
