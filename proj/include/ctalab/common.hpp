#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ctalab {

using json = nlohmann::json;

enum class ErrorKind {
    parse,
    conflict,
    authorization,
    capacity,
    integrity,
    divergence,
    empty_input,
    invalid_argument,
    unresolved_tie,
    undefined_agreement,
    not_found,
    credential,
    transport,
    io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind so the
// CLI can emit a structured error report.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

enum class Label { negative = 0, positive = 1 };

std::string_view to_string(Label label);
Label label_from_string(std::string_view s);
// Accepts booleans, 0/1, "positive"/"negative", "true"/"false".
Label label_from_json(const json& j);

enum class PostType { post, story };
enum class TextType { caption, ocr, transcription };

std::string_view to_string(PostType t);
std::string_view to_string(TextType t);
PostType post_type_from_string(std::string_view s);
TextType text_type_from_string(std::string_view s);

// The five (post_type, text_type) strata in reporting order.
struct Stratum {
    PostType post_type;
    TextType text_type;
    auto operator<=>(const Stratum&) const = default;
};

inline constexpr Stratum kStrata[] = {
    {PostType::post, TextType::caption},
    {PostType::post, TextType::ocr},
    {PostType::post, TextType::transcription},
    {PostType::story, TextType::ocr},
    {PostType::story, TextType::transcription},
};

std::size_t stratum_index(Stratum s);

// Exact rational in (0, 1], parsed from "0.25" or "1/4".
struct Fraction {
    std::int64_t num = 1;
    std::int64_t den = 1;

    static Fraction parse(std::string_view s);
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    // round(fraction * n), halves rounded up.
    std::size_t apply_half_up(std::size_t n) const;
    std::string str() const;
};

// JSON Lines helpers. Readers report 1-based line numbers in parse errors.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t line)>& fn);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);
json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Seed derivation for independent deterministic streams.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

std::size_t utf8_length(std::string_view s);
std::vector<std::string_view> utf8_code_points(std::string_view s);
// Lowercases ASCII and the Latin-1 supplement letters (covers German umlauts).
std::string utf8_lower(std::string_view s);
bool is_blank(std::string_view s);

void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace ctalab
