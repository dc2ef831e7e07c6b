#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "semgeom/config.hpp"
#include "semgeom/trials.hpp"
#include "semgeom/types.hpp"
#include "semgeom/vocab.hpp"

namespace semgeom {

enum class DecodeMode : std::uint8_t { greedy, nucleus };

struct DecodeParams {
    DecodeMode mode = DecodeMode::greedy;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_new_tokens = 10;
    std::optional<std::uint64_t> seed;

    static DecodeParams greedy(int max_new_tokens);
    static DecodeParams nucleus(double temperature, double top_p, int max_new_tokens, std::uint64_t seed);
    // nucleus requires temperature > 0 and 0 < top_p <= 1.
    void validate() const;
};

// Anything that can answer a single prompt. Implementations must not keep
// conversational state between calls; the harness may call from several
// threads at once.
class Participant {
public:
    virtual ~Participant() = default;
    virtual std::string complete(const std::string& prompt, const DecodeParams& decode) = 0;
    virtual bool supports_seeded_sampling() const { return true; }
};

enum class FailureReason : std::uint8_t { format, count, out_of_set, cue_repeat, duplicate, multi_word };

std::string_view to_string(FailureReason r);
FailureReason parse_failure_reason(std::string_view text);

struct TrialRecord {
    Paradigm paradigm = Paradigm::fc;
    WordId cue = 0;
    std::uint32_t trial_index = 0;  // FC group index or FA run index
    std::string raw_output;
    std::vector<std::string> parsed_responses;
    bool compliant = false;
    int attempts = 0;
    std::optional<FailureReason> failure_reason;
};

struct ComplianceResult {
    std::vector<std::string> words;  // case-folded
    std::optional<FailureReason> failure;
    bool ok() const { return !failure; }
};

// Accepts a line starting with "output:" (any case), comma-separated words,
// optional trailing period/whitespace. Candidate matching is case-folded.
ComplianceResult check_fc_compliance(std::string_view raw, const FcTrial& trial, const Vocabulary& vocab,
                                     const RunConfig& cfg);
ComplianceResult check_fa_compliance(std::string_view raw, std::string_view cue, const RunConfig& cfg);

// Deterministic repair prompt: quotes the rejected answer, names the problem,
// restates the rules, then repeats the original prompt.
std::string render_repair_prompt(std::string_view original_prompt, std::string_view previous_output,
                                 FailureReason reason, int n_picks);

// Greedy attempt, then up to max_repairs repair prompts, then up to
// max_retries seeded nucleus retries. Stops at the first compliant answer.
TrialRecord run_fc_trial(Participant& p, const FcTrial& trial, const Vocabulary& vocab, const RunConfig& cfg);
// One sampled attempt; no repair loop.
TrialRecord run_fa_trial(Participant& p, const FaTrial& trial, const Vocabulary& vocab, const RunConfig& cfg);

class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void append(const TrialRecord& record) = 0;
    virtual void flush() {}
};

class MemorySink final : public RecordSink {
public:
    void append(const TrialRecord& record) override;
    std::vector<TrialRecord> records;
};

// Appends one JSON object per line and flushes after each batch.
class JsonlSink final : public RecordSink {
public:
    JsonlSink(const std::filesystem::path& path, const Vocabulary& vocab, bool append_mode);
    void append(const TrialRecord& record) override;
    void flush() override;

private:
    std::ofstream out_;
    const Vocabulary* vocab_;
};

std::string record_to_json(const TrialRecord& r, const Vocabulary& vocab);
TrialRecord record_from_json(std::string_view line, const Vocabulary& vocab);
std::vector<TrialRecord> read_records(const std::filesystem::path& path, const Vocabulary& vocab);

// Drops a trailing partial line (interrupted write) and returns the number of
// complete records kept.
std::size_t repair_record_file(const std::filesystem::path& path, const Vocabulary& vocab);

struct CollectionSummary {
    std::size_t total = 0;
    std::size_t initially_compliant = 0;
    std::size_t compliant = 0;
    std::vector<std::size_t> usable_per_cue;  // compliant associations per cue

    double initial_compliance_rate() const;
    double final_compliance_rate() const;
    void add(const TrialRecord& r, std::size_t vocab_size);
    void merge(const CollectionSummary& other);
};

struct CollectOptions {
    std::size_t workers = 1;
    std::size_t skip = 0;  // trials already persisted (resume)
};

// Runs trials with at most cfg.collection.batch_size in flight, appending
// records in trial order. Transport failures abort with Error(transport).
CollectionSummary collect(std::span<const FcTrial> trials, Participant& p, const Vocabulary& vocab,
                          const RunConfig& cfg, RecordSink& sink, const CollectOptions& options = {});
CollectionSummary collect(std::span<const FaTrial> trials, Participant& p, const Vocabulary& vocab,
                          const RunConfig& cfg, RecordSink& sink, const CollectOptions& options = {});

CollectionSummary summarize(std::span<const TrialRecord> records, std::size_t vocab_size);

// ---------------------------------------------------------------------------
// Participants

// Planted word geometry: unit-normalized Gaussian vectors. With shared > 0
// each vector is normalize(sqrt(shared) * g(shared_seed) + sqrt(1 - shared) * g(seed)),
// so several participants can share part of their geometry.
struct PlantedGeometrySpec {
    std::size_t dim = 32;
    double tau = 0.2;
    std::uint64_t seed = 1;
    double shared = 0.0;  // weight of the shared component, in [0, 1]
    std::uint64_t shared_seed = 0;
};

Eigen::MatrixXd planted_embeddings(std::size_t vocab_size, const PlantedGeometrySpec& spec);

// Simulated respondent: FC picks are drawn without replacement from
// softmax(cos(cue, candidate) / tau) over the candidate set; FA answers from
// softmax over all other words. tau <= 0 means deterministic argmax. The
// prompt is parsed to recover the cue and candidates; randomness is a pure
// function of (noise seed, prompt, decode seed).
class PlantedGeometryParticipant final : public Participant {
public:
    PlantedGeometryParticipant(const Vocabulary& vocab, const RunConfig& cfg, const PlantedGeometrySpec& spec);

    std::string complete(const std::string& prompt, const DecodeParams& decode) override;

    const Eigen::MatrixXd& embeddings() const noexcept { return embeddings_; }
    // Cosine geometry of the planted embeddings.
    Eigen::MatrixXd planted_similarity() const;

private:
    std::vector<WordId> sample(WordId cue, std::span<const WordId> pool, std::size_t n, std::uint64_t seed) const;

    const Vocabulary* vocab_;
    int n_picks_;
    int fa_words_;
    PlantedGeometrySpec spec_;
    Eigen::MatrixXd embeddings_;
};

// Wraps another participant and replaces its answer with a malformed one with
// probability `rate`, independently per (prompt, decode seed).
class FaultInjectingParticipant final : public Participant {
public:
    FaultInjectingParticipant(std::shared_ptr<Participant> inner, double rate, std::uint64_t seed);
    std::string complete(const std::string& prompt, const DecodeParams& decode) override;

    std::size_t injected() const noexcept { return injected_.load(); }
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<Participant> inner_;
    double rate_;
    std::uint64_t seed_;
    std::atomic<std::size_t> injected_{0};
    std::atomic<std::size_t> calls_{0};
};

struct HttpEndpoint {
    std::string base_url;  // e.g. http://127.0.0.1:8000/v1
    std::string model;
    std::string token_env = "SEMGEOM_API_TOKEN";
    int timeout_seconds = 60;
};

// OpenAI-style chat-completions client: POST {base_url}/chat/completions with
// {model, messages, temperature, top_p, max_tokens, seed}. Failures throw
// Error(transport, "TRANSPORT").
class HttpChatParticipant final : public Participant {
public:
    explicit HttpChatParticipant(HttpEndpoint endpoint);
    std::string complete(const std::string& prompt, const DecodeParams& decode) override;

private:
    HttpEndpoint endpoint_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

// Builds a participant from a spec string:
//   simulated:tau=0.2,dim=32,seed=7[,shared=0.5,shared_seed=3][,fault=0.1,fault_seed=9]
//   http:url=http://host:port/v1,model=name[,token_env=VAR,timeout=60]
std::unique_ptr<Participant> make_participant(std::string_view spec, const Vocabulary& vocab, const RunConfig& cfg);
PlantedGeometrySpec parse_simulated_spec(std::string_view spec);

}  // namespace semgeom
