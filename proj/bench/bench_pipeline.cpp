// Serial reference vs OpenMP chunk loop. The latency backend stands in for a
// remote model, where the win comes from overlapping requests.

#include "mad/ir/parser.hpp"
#include "mad/pipeline/pipeline.hpp"
#include "mad/util/fs.hpp"

#include <benchmark/benchmark.h>

#include <chrono>
#include <filesystem>
#include <thread>

using namespace mad;

namespace {

struct Fixture {
    prompt::PromptEngine engine{prompt::load_prompt_assets(std::filesystem::path(MAD_SOURCE_DIR) / "prompts")};
    std::vector<std::pair<ir::ModuleIR, std::string>> modules;

    Fixture()
    {
        const std::filesystem::path corpus = std::filesystem::path(MAD_SOURCE_DIR) / "tests/fixtures/corpus";
        for (const char* stem : {"04_marketplace", "09_registry", "12_whitelist"})
            modules.emplace_back(ir::parse_disassembly(util::read_file(corpus / (std::string(stem) + ".disasm"))),
                                 util::read_file(corpus / (std::string(stem) + ".move")));
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

class LatencyBackend : public llm::Backend {
public:
    std::string model_id() const override { return "latency"; }

protected:
    std::string respond(const prompt::PromptBundle& b, const std::string&) override
    {
        std::this_thread::sleep_for(std::chrono::milliseconds(3));
        return mock_.complete(b).response_text;
    }

private:
    llm::MockBackend mock_;
};

template <class Backend, bool Parallel>
void run(benchmark::State& state)
{
    const auto& f = fixture();
    pipeline::Options opts;
    opts.prompt = f.engine.config("full");
    opts.max_parallel = static_cast<std::size_t>(state.range(0));
    Backend backend;
    std::size_t chunks = 0;
    for (auto _ : state) {
        for (const auto& [ir, low] : f.modules) {
            auto res = Parallel ? pipeline::decompile_module(ir, low, f.engine, backend, opts)
                                : pipeline::decompile_module_serial(ir, low, f.engine, backend, opts);
            chunks += res.chunks.size();
            benchmark::DoNotOptimize(res.decompiled.data());
        }
    }
    state.counters["chunks/s"] = benchmark::Counter(static_cast<double>(chunks), benchmark::Counter::kIsRate);
}

} // namespace

BENCHMARK(run<llm::MockBackend, false>)->Name("mock/serial")->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(run<llm::MockBackend, true>)->Name("mock/parallel")->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(run<LatencyBackend, false>)->Name("latency/serial")->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(run<LatencyBackend, true>)
    ->Name("latency/parallel")
    ->Arg(2)
    ->Arg(4)
    ->Arg(8)
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
