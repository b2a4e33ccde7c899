#include "ctalab/common.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace ctalab {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return "parse";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::authorization: return "authorization";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::integrity: return "integrity";
        case ErrorKind::divergence: return "divergence";
        case ErrorKind::empty_input: return "empty_input";
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::unresolved_tie: return "unresolved_tie";
        case ErrorKind::undefined_agreement: return "undefined_agreement";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::credential: return "credential";
        case ErrorKind::transport: return "transport";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

std::string_view to_string(Label label) {
    return label == Label::positive ? "positive" : "negative";
}

Label label_from_string(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "positive" || lower == "true" || lower == "1") return Label::positive;
    if (lower == "negative" || lower == "false" || lower == "0") return Label::negative;
    throw Error(ErrorKind::parse, "unrecognized label '" + std::string(s) + "'");
}

Label label_from_json(const json& j) {
    if (j.is_boolean()) return j.get<bool>() ? Label::positive : Label::negative;
    if (j.is_number_integer()) {
        auto v = j.get<std::int64_t>();
        if (v == 0 || v == 1) return v == 1 ? Label::positive : Label::negative;
    }
    if (j.is_string()) return label_from_string(j.get<std::string>());
    throw Error(ErrorKind::parse, "unrecognized label value " + j.dump());
}

std::string_view to_string(PostType t) { return t == PostType::post ? "post" : "story"; }

std::string_view to_string(TextType t) {
    switch (t) {
        case TextType::caption: return "caption";
        case TextType::ocr: return "ocr";
        case TextType::transcription: return "transcription";
    }
    return "unknown";
}

PostType post_type_from_string(std::string_view s) {
    if (s == "post") return PostType::post;
    if (s == "story") return PostType::story;
    throw Error(ErrorKind::parse, "unknown post type '" + std::string(s) + "'");
}

TextType text_type_from_string(std::string_view s) {
    if (s == "caption") return TextType::caption;
    if (s == "ocr") return TextType::ocr;
    if (s == "transcription") return TextType::transcription;
    throw Error(ErrorKind::parse, "unknown text type '" + std::string(s) + "'");
}

std::size_t stratum_index(Stratum s) {
    for (std::size_t i = 0; i < std::size(kStrata); ++i)
        if (kStrata[i] == s) return i;
    throw Error(ErrorKind::invalid_argument, "story captions are not a valid stratum");
}

Fraction Fraction::parse(std::string_view s) {
    auto fail = [&] { return Error(ErrorKind::invalid_argument, "bad fraction '" + std::string(s) + "'"); };
    Fraction f;
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        auto a = s.substr(0, slash), b = s.substr(slash + 1);
        if (std::from_chars(a.data(), a.data() + a.size(), f.num).ec != std::errc{} ||
            std::from_chars(b.data(), b.data() + b.size(), f.den).ec != std::errc{})
            throw fail();
    } else {
        auto dot = s.find('.');
        std::string digits(s.substr(0, dot));
        std::int64_t den = 1;
        if (dot != std::string_view::npos) {
            auto frac = s.substr(dot + 1);
            if (frac.size() > 12) throw fail();
            digits += frac;
            for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        }
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) throw fail();
        f.num = std::stoll(digits);
        f.den = den;
    }
    if (f.den <= 0 || f.num <= 0 || f.num > f.den)
        throw Error(ErrorKind::invalid_argument,
                    "fraction must lie in (0, 1], got '" + std::string(s) + "'");
    auto g = std::gcd(f.num, f.den);
    f.num /= g;
    f.den /= g;
    return f;
}

std::size_t Fraction::apply_half_up(std::size_t n) const {
    // floor((2*num*n + den) / (2*den))
    auto twice = 2 * static_cast<std::int64_t>(n) * num + den;
    return static_cast<std::size_t>(twice / (2 * den));
}

std::string Fraction::str() const { return std::to_string(num) + "/" + std::to_string(den); }

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::parse,
                        path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        fn(j, lineno);
    }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

json read_json_file(const std::filesystem::path& path) {
    auto text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::io, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
    // splitmix64 finalizer over seed xor salt hash
    std::uint64_t z = seed ^ fnv1a64(salt);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

static std::size_t utf8_seq_len(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xe) return 3;
    if ((lead >> 3) == 0x1e) return 4;
    return 1;  // stray continuation byte, count as one unit
}

std::vector<std::string_view> utf8_code_points(std::string_view s) {
    std::vector<std::string_view> out;
    for (std::size_t i = 0; i < s.size();) {
        auto n = std::min(utf8_seq_len(static_cast<unsigned char>(s[i])), s.size() - i);
        out.push_back(s.substr(i, n));
        i += n;
    }
    return out;
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++n)
        i += std::min(utf8_seq_len(static_cast<unsigned char>(s[i])), s.size() - i);
    return n;
}

std::string utf8_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            out += static_cast<char>(std::tolower(c));
        } else if (c == 0xC3 && i + 1 < s.size()) {
            // U+00C0..U+00DE map to +0x20, except U+00D7 (multiplication sign)
            auto d = static_cast<unsigned char>(s[i + 1]);
            out += static_cast<char>(c);
            out += static_cast<char>((d >= 0x80 && d <= 0x9E && d != 0x97) ? d + 0x20 : d);
            ++i;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void log_warning(std::string_view message) { std::cerr << "[warn] " << message << '\n'; }
void log_info(std::string_view message) { std::cerr << "[info] " << message << '\n'; }

}  // namespace ctalab
