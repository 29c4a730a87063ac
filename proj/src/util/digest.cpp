#include "mad/util/digest.hpp"

#include "mad/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cctype>

namespace mad::util {

std::string sha256_hex(std::string_view data)
{
    Sha256 h;
    h.add(data);
    return h.hex();
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new())
{
    EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::add(std::string_view raw)
{
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), raw.data(), raw.size());
    return *this;
}

Sha256& Sha256::add_part(std::string_view part)
{
    std::array<unsigned char, 8> len{};
    std::uint64_t n = part.size();
    for (auto& b : len) {
        b = static_cast<unsigned char>(n & 0xff);
        n >>= 8;
    }
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), len.data(), len.size());
    return add(part);
}

std::string Sha256::hex()
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int n = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md.data(), &n);
    return to_hex(std::span<const std::uint8_t>(md.data(), n));
}

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_encode(std::string_view bytes)
{
    return base64_encode(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    std::string clean;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c)))
            clean.push_back(c);
    if (clean.size() % 4 != 0)
        throw Error(ErrorKind::InvalidRequest, "base64", "length not a multiple of 4");
    std::vector<std::uint8_t> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0)
        throw Error(ErrorKind::InvalidRequest, "base64", "invalid character");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock counts padding bytes as output.
    if (!clean.empty() && clean.back() == '=')
        --len;
    if (clean.size() >= 2 && clean[clean.size() - 2] == '=')
        --len;
    out.resize(len);
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex)
{
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0)
        throw Error(ErrorKind::SyntaxError, std::string(hex), "odd-length hex");
    std::vector<std::uint8_t> out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = nibble(hex[i]);
        const int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0)
            throw Error(ErrorKind::SyntaxError, std::string(hex), "invalid hex digit");
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

} // namespace mad::util
