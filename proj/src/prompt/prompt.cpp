#include "mad/prompt/prompt.hpp"

#include "mad/error.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/fs.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <regex>

namespace mad::prompt {

namespace fs = std::filesystem;

namespace {

std::string read_asset(const fs::path& path, const std::string& name)
{
    if (!fs::is_regular_file(path))
        throw Error(ErrorKind::MissingAsset, name, "expected at " + path.string());
    return util::read_file(path);
}

std::string trim_trailing(std::string s)
{
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' '))
        s.pop_back();
    return s;
}

std::vector<std::string> split_tags(std::string_view line)
{
    std::vector<std::string> tags;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            if (!cur.empty())
                tags.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur += c;
        }
    }
    if (!cur.empty())
        tags.push_back(cur);
    return tags;
}

FewshotExample load_example(std::size_t index, const std::string& input_text, const std::string& output_text)
{
    FewshotExample ex;
    ex.index = index;
    std::string input = input_text;
    static const std::string kTagPrefix = "// tags:";
    if (input.starts_with(kTagPrefix)) {
        const auto eol = input.find('\n');
        ex.tags = split_tags(std::string_view(input).substr(kTagPrefix.size(), eol - kTagPrefix.size()));
        input = eol == std::string::npos ? std::string() : input.substr(eol + 1);
    }
    ex.input = trim_trailing(input);
    ex.output = trim_trailing(output_text);

    const auto label = std::to_string(index);
    seg::FunctionOutput in, out;
    try {
        in = seg::parse_function_output(ex.input, label);
        out = seg::parse_function_output(ex.output, label);
    } catch (const Error& e) {
        throw Error(ErrorKind::MalformedExample, label, e.what());
    }
    if (in.name != out.name)
        throw Error(ErrorKind::MalformedExample, label, "input defines '" + in.name + "' but output defines '" + out.name + "'");
    if (!in.dropped_items.empty() || !out.dropped_items.empty())
        throw Error(ErrorKind::MalformedExample, label, "example contains module-level items besides use lines");
    ex.name = in.name;
    return ex;
}

} // namespace

PromptAssets load_prompt_assets(const fs::path& dir)
{
    PromptAssets a;
    util::Sha256 digest;
    a.domain_knowledge = trim_trailing(read_asset(dir / "domain_knowledge.md", "domain_knowledge.md"));
    a.instructions = trim_trailing(read_asset(dir / "instructions.md", "instructions.md"));
    digest.add_part("domain_knowledge.md").add_part(a.domain_knowledge);
    digest.add_part("instructions.md").add_part(a.instructions);

    const fs::path shots = dir / "fewshot";
    if (!fs::is_directory(shots))
        throw Error(ErrorKind::MissingAsset, "fewshot", "expected directory " + shots.string());

    static const std::regex kName(R"(([0-9]+)_(input|output)\.move)");
    std::map<std::size_t, std::pair<fs::path, fs::path>> pairs;
    for (const auto& e : fs::directory_iterator(shots)) {
        std::smatch m;
        const std::string fname = e.path().filename().string();
        if (!std::regex_match(fname, m, kName))
            continue;
        auto& slot = pairs[std::stoul(m[1].str())];
        (m[2] == "input" ? slot.first : slot.second) = e.path();
    }
    for (const auto& [index, paths] : pairs) {
        if (paths.first.empty() || paths.second.empty())
            throw Error(ErrorKind::MalformedExample, std::to_string(index), "input/output pair is incomplete");
        const std::string in = util::read_file(paths.first);
        const std::string out = util::read_file(paths.second);
        digest.add_part(paths.first.filename().string()).add_part(in);
        digest.add_part(paths.second.filename().string()).add_part(out);
        a.examples.push_back(load_example(index, in, out));
    }
    if (a.examples.size() < kDefaultFewshotCount)
        spdlog::warn("prompt assets in {} provide {} few-shot examples (expected {}); fewshot_count is capped", dir.string(),
                     a.examples.size(), kDefaultFewshotCount);
    a.version = digest.hex();
    return a;
}

std::string PromptConfig::arm() const
{
    const bool full_count = fewshot_count == kDefaultFewshotCount;
    if (include_domain_knowledge && include_instructions && include_fewshot && full_count)
        return "full";
    if (!include_domain_knowledge && include_instructions && include_fewshot && full_count)
        return "no-domain";
    if (include_domain_knowledge && !include_instructions && include_fewshot && full_count)
        return "no-instructions";
    if (include_domain_knowledge && include_instructions && !include_fewshot)
        return "no-fewshot";
    return "custom";
}

std::vector<PromptConfig> ablation_arms()
{
    std::vector<PromptConfig> arms(4);
    arms[1].include_domain_knowledge = false;
    arms[2].include_instructions = false;
    arms[3].include_fewshot = false;
    return arms;
}

PromptConfig arm_config(std::string_view arm)
{
    for (const auto& cfg : ablation_arms())
        if (cfg.arm() == arm)
            return cfg;
    throw Error(ErrorKind::InvalidRequest, std::string(arm), "unknown ablation arm (full, no-domain, no-instructions, no-fewshot)");
}

std::size_t char_length(std::string_view text)
{
    return static_cast<std::size_t>(
        std::count_if(text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string format_request(std::string_view context, std::string_view function_text)
{
    std::string out;
    if (!context.empty()) {
        out += "Module context (declarations and the signatures of the other functions):\n```move\n";
        out += context;
        if (!context.ends_with('\n'))
            out += '\n';
        out += "```\n\n";
    }
    out += "Function to decompile:\n```move\n";
    out += function_text;
    if (!function_text.empty() && !function_text.ends_with('\n'))
        out += '\n';
    out += "```\n\n";
    out += "Reply with exactly one fenced ```move code block containing the decompiled function and the `use` lines it "
           "needs. The block must contain exactly one function definition and nothing else.";
    return out;
}

std::string format_answer(std::string_view function_text)
{
    std::string out = "```move\n";
    out += function_text;
    if (!function_text.ends_with('\n'))
        out += '\n';
    return out + "```";
}

std::string PromptBundle::serialize() const
{
    nlohmann::ordered_json messages = nlohmann::ordered_json::array();
    if (!system_sections.empty()) {
        std::string system;
        for (const auto& [id, text] : system_sections) {
            if (!system.empty())
                system += "\n\n";
            system += text;
        }
        messages.push_back({{"role", "system"}, {"content", system}});
    }
    for (const auto& [user, assistant] : fewshot_pairs) {
        messages.push_back({{"role", "user"}, {"content", user}});
        messages.push_back({{"role", "assistant"}, {"content", assistant}});
    }
    messages.push_back({{"role", "user"}, {"content", user_payload}});
    return messages.dump();
}

std::string PromptBundle::digest() const { return util::sha256_hex(serialize()); }

PromptEngine::PromptEngine(PromptAssets assets) : assets_(std::move(assets)), loaded_(true) {}

PromptConfig PromptEngine::config(std::string_view arm) const
{
    PromptConfig cfg = arm_config(arm);
    cfg.prompt_version = assets_.version;
    return cfg;
}

PromptBundle PromptEngine::compose(const seg::FunctionChunk& chunk, const PromptConfig& cfg) const
{
    if (!loaded_)
        throw Error(ErrorKind::AssetsNotLoaded, "prompt-engine", "call load_prompt_assets first");
    PromptBundle b;
    b.prompt_version = assets_.version;
    if (cfg.include_domain_knowledge)
        b.system_sections.emplace_back("domain_knowledge", assets_.domain_knowledge);
    if (cfg.include_instructions)
        b.system_sections.emplace_back("instructions", assets_.instructions);
    if (cfg.include_fewshot) {
        const std::size_t n = std::min(cfg.fewshot_count, assets_.examples.size());
        for (std::size_t i = 0; i < n; ++i)
            b.fewshot_pairs.emplace_back(format_request({}, assets_.examples[i].input), format_answer(assets_.examples[i].output));
    }
    b.user_payload = format_request(chunk.context, chunk.raw_text);

    for (const auto& [id, text] : b.system_sections)
        b.char_count += char_length(text);
    for (const auto& [user, assistant] : b.fewshot_pairs)
        b.char_count += char_length(user) + char_length(assistant);
    b.char_count += char_length(b.user_payload);
    return b;
}

} // namespace mad::prompt
