#include "ksg/hash.hpp"

#include <openssl/evp.h>

#include <array>

#include "ksg/error.hpp"

namespace ksg {

std::string sha256_hex(std::string_view data)
{
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

std::string stable_id(std::string_view prefix, std::string_view first, std::string_view second)
{
  std::string joined;
  joined.reserve(first.size() + second.size() + 1);
  joined.append(first);
  joined.push_back('\x1f');
  joined.append(second);
  return std::string(prefix) + sha256_hex(joined).substr(0, 16);
}

std::string_view to_string(ErrorCode code) noexcept
{
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Config: return "config";
    case ErrorCode::Stage2Failure: return "stage2_failure";
    case ErrorCode::ReplayMiss: return "replay_miss";
    case ErrorCode::Transport: return "transport";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::Immutable: return "immutable";
    case ErrorCode::Mismatch: return "mismatch";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

}  // namespace ksg
