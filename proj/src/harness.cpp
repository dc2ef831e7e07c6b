#include "semgeom/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "semgeom/error.hpp"
#include "semgeom/parallel.hpp"
#include "semgeom/rng.hpp"

namespace semgeom {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Decode parameters

DecodeParams DecodeParams::greedy(int max_new_tokens) {
    DecodeParams d;
    d.max_new_tokens = max_new_tokens;
    return d;
}

DecodeParams DecodeParams::nucleus(double temperature, double top_p, int max_new_tokens, std::uint64_t seed) {
    DecodeParams d;
    d.mode = DecodeMode::nucleus;
    d.temperature = temperature;
    d.top_p = top_p;
    d.max_new_tokens = max_new_tokens;
    d.seed = seed;
    d.validate();
    return d;
}

void DecodeParams::validate() const {
    if (mode == DecodeMode::nucleus && !(temperature > 0.0 && top_p > 0.0 && top_p <= 1.0))
        throw Error(ErrorKind::config, "BAD_DECODE", "nucleus sampling needs temperature > 0 and 0 < top_p <= 1");
    if (max_new_tokens < 1) throw Error(ErrorKind::config, "BAD_DECODE", "max_new_tokens must be >= 1");
}

// ---------------------------------------------------------------------------
// Compliance

std::string_view to_string(FailureReason r) {
    switch (r) {
        case FailureReason::format: return "FORMAT";
        case FailureReason::count: return "COUNT";
        case FailureReason::out_of_set: return "OUT_OF_SET";
        case FailureReason::cue_repeat: return "CUE_REPEAT";
        case FailureReason::duplicate: return "DUPLICATE";
        case FailureReason::multi_word: return "MULTI_WORD";
    }
    return "?";
}

FailureReason parse_failure_reason(std::string_view text) {
    for (auto r : {FailureReason::format, FailureReason::count, FailureReason::out_of_set, FailureReason::cue_repeat,
                   FailureReason::duplicate, FailureReason::multi_word})
        if (text == to_string(r)) return r;
    throw Error(ErrorKind::data, "BAD_RECORD", "unknown failure reason '" + std::string(text) + "'");
}

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
    return s;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char c = s[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c != prefix[i]) return false;
    }
    return true;
}

// Text after "output:" on the first line that starts with it, with one
// trailing period and surrounding whitespace removed.
std::optional<std::string_view> output_payload(std::string_view raw) {
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto eol = raw.find('\n', pos);
        if (eol == std::string_view::npos) eol = raw.size();
        auto line = trim(raw.substr(pos, eol - pos));
        if (starts_with_ci(line, "output:")) {
            auto payload = trim(line.substr(7));
            if (!payload.empty() && payload.back() == '.') payload = trim(payload.substr(0, payload.size() - 1));
            return payload;
        }
        pos = eol + 1;
    }
    return std::nullopt;
}

std::vector<std::string> split_words(std::string_view payload) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto comma = payload.find(',', pos);
        auto piece = payload.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        out.push_back(normalize_word(piece));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

bool has_duplicates(const std::vector<std::string>& words) {
    std::unordered_set<std::string_view> seen;
    for (const auto& w : words)
        if (!seen.insert(w).second) return true;
    return false;
}

ComplianceResult fail(FailureReason r) { return ComplianceResult{{}, r}; }

}  // namespace

ComplianceResult check_fc_compliance(std::string_view raw, const FcTrial& trial, const Vocabulary& vocab,
                                     const RunConfig& cfg) {
    auto payload = output_payload(raw);
    if (!payload || payload->empty()) return fail(FailureReason::format);
    auto words = split_words(*payload);
    if (std::any_of(words.begin(), words.end(), [](const auto& w) { return w.empty(); }))
        return fail(FailureReason::format);
    if (words.size() != static_cast<std::size_t>(cfg.paradigm.n_picks)) return fail(FailureReason::count);
    const auto& cue = vocab.word(trial.cue);
    for (const auto& w : words) {
        if (w == cue) return fail(FailureReason::cue_repeat);
        auto id = vocab.find(w);
        if (!id || std::find(trial.candidates.begin(), trial.candidates.end(), *id) == trial.candidates.end())
            return fail(FailureReason::out_of_set);
    }
    if (has_duplicates(words)) return fail(FailureReason::duplicate);
    return ComplianceResult{std::move(words), std::nullopt};
}

ComplianceResult check_fa_compliance(std::string_view raw, std::string_view cue, const RunConfig& cfg) {
    auto payload = output_payload(raw);
    if (!payload || payload->empty()) return fail(FailureReason::format);
    auto words = split_words(*payload);
    for (const auto& w : words) {
        if (w.empty()) return fail(FailureReason::format);
        for (char c : w) {
            if (is_blank(c)) return fail(FailureReason::multi_word);
            const auto u = static_cast<unsigned char>(c);
            if (u < 0x80 && std::ispunct(u) && c != '-' && c != '\'') return fail(FailureReason::format);
        }
    }
    if (words.size() != static_cast<std::size_t>(cfg.paradigm.fa_words_per_run)) return fail(FailureReason::count);
    const auto folded_cue = normalize_word(cue);
    if (std::find(words.begin(), words.end(), folded_cue) != words.end()) return fail(FailureReason::cue_repeat);
    if (has_duplicates(words)) return fail(FailureReason::duplicate);
    return ComplianceResult{std::move(words), std::nullopt};
}

std::string render_repair_prompt(std::string_view original_prompt, std::string_view previous_output,
                                 FailureReason reason, int n_picks) {
    std::string problem;
    switch (reason) {
        case FailureReason::format: problem = "It did not follow the format \"output: word1, word2\"."; break;
        case FailureReason::count: problem = "It did not contain exactly " + std::to_string(n_picks) + " words."; break;
        case FailureReason::out_of_set: problem = "It selected a word that is not in the candidate list."; break;
        case FailureReason::cue_repeat: problem = "It selected the input word."; break;
        case FailureReason::duplicate: problem = "It selected the same word more than once."; break;
        case FailureReason::multi_word: problem = "It contained a multi-word answer."; break;
    }
    const auto n = std::to_string(n_picks);
    std::string out;
    out += "Your previous answer was invalid.\n";
    out += "Previous answer: \"" + std::string(trim(previous_output)) + "\"\n";
    out += "Problem: " + problem + "\n";
    out += "\n";
    out += "Remember the rules:\n";
    out += "- Select exactly " + n + " words.\n";
    out += "- All selected words must come from the provided candidate list.\n";
    out += "- Do not select the input word.\n";
    out += "- Answer with a single line: output: word1, word2\n";
    out += "\n";
    out += "Try again.\n";
    out += "\n";
    out += original_prompt;
    return out;
}

// ---------------------------------------------------------------------------
// Trial state machines

namespace {

std::string complete_with_backoff(Participant& p, const std::string& prompt, const DecodeParams& decode,
                                  const RunConfig& cfg) {
    const int retries = cfg.collection.transport_retries;
    for (int attempt = 0;; ++attempt) {
        try {
            return p.complete(prompt, decode);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::transport || attempt >= retries) throw;
            const auto delay = std::chrono::milliseconds(cfg.collection.transport_backoff_ms) * (1LL << attempt);
            std::this_thread::sleep_for(delay);
        }
    }
}

}  // namespace

TrialRecord run_fc_trial(Participant& p, const FcTrial& trial, const Vocabulary& vocab, const RunConfig& cfg) {
    const auto& cc = cfg.collection;
    const std::string prompt = render_fc_prompt(trial, vocab, cfg);

    TrialRecord rec;
    rec.paradigm = Paradigm::fc;
    rec.cue = trial.cue;
    rec.trial_index = trial.group_index;

    ComplianceResult result;
    auto attempt = [&](const std::string& text, const DecodeParams& decode) {
        rec.raw_output = complete_with_backoff(p, text, decode, cfg);
        ++rec.attempts;
        result = check_fc_compliance(rec.raw_output, trial, vocab, cfg);
    };

    attempt(prompt, DecodeParams::greedy(cc.fc_max_new_tokens));
    for (int r = 0; r < cc.max_repairs && !result.ok(); ++r)
        attempt(render_repair_prompt(prompt, rec.raw_output, *result.failure, cfg.paradigm.n_picks),
                DecodeParams::greedy(cc.fc_max_new_tokens));
    for (int r = 0; r < cc.max_retries && !result.ok(); ++r) {
        const auto seed = fc_attempt_seed(cfg.master_seed, trial.cue, trial.group_index, rec.attempts);
        attempt(prompt, DecodeParams::nucleus(cc.fc_retry_temperature, cc.fc_retry_top_p, cc.fc_max_new_tokens, seed));
    }

    rec.compliant = result.ok();
    rec.failure_reason = result.failure;
    rec.parsed_responses = std::move(result.words);
    return rec;
}

TrialRecord run_fa_trial(Participant& p, const FaTrial& trial, const Vocabulary& vocab, const RunConfig& cfg) {
    const auto& cc = cfg.collection;
    const auto& cue = vocab.word(trial.cue);
    TrialRecord rec;
    rec.paradigm = Paradigm::fa;
    rec.cue = trial.cue;
    rec.trial_index = trial.run_index;
    rec.raw_output = complete_with_backoff(
        p, render_fa_prompt(cue, cfg),
        DecodeParams::nucleus(cc.fa_temperature, cc.fa_top_p, cc.fa_max_new_tokens, trial.sampling_seed), cfg);
    rec.attempts = 1;
    auto result = check_fa_compliance(rec.raw_output, cue, cfg);
    rec.compliant = result.ok();
    rec.failure_reason = result.failure;
    rec.parsed_responses = std::move(result.words);
    return rec;
}

// ---------------------------------------------------------------------------
// Sinks and record files

void MemorySink::append(const TrialRecord& record) { records.push_back(record); }

JsonlSink::JsonlSink(const std::filesystem::path& path, const Vocabulary& vocab, bool append_mode)
    : out_(path, std::ios::binary | (append_mode ? std::ios::app : std::ios::trunc)), vocab_(&vocab) {
    if (!out_) throw Error(ErrorKind::data, "WRITE_FAILED", "cannot open " + path.string());
}

void JsonlSink::append(const TrialRecord& record) { out_ << record_to_json(record, *vocab_) << '\n'; }

void JsonlSink::flush() { out_.flush(); }

std::string record_to_json(const TrialRecord& r, const Vocabulary& vocab) {
    json j;
    j["paradigm"] = std::string(to_string(r.paradigm));
    j["cue"] = vocab.word(r.cue);
    j["trial_index"] = r.trial_index;
    j["raw_output"] = r.raw_output;
    j["responses"] = r.parsed_responses;
    j["compliant"] = r.compliant;
    j["attempts"] = r.attempts;
    j["failure_reason"] = r.failure_reason ? json(std::string(to_string(*r.failure_reason))) : json(nullptr);
    return j.dump();
}

TrialRecord record_from_json(std::string_view line, const Vocabulary& vocab) {
    try {
        const auto j = json::parse(line);
        TrialRecord r;
        r.paradigm = parse_paradigm(j.at("paradigm").get<std::string>());
        r.cue = vocab.id(j.at("cue").get<std::string>());
        r.trial_index = j.at("trial_index").get<std::uint32_t>();
        r.raw_output = j.at("raw_output").get<std::string>();
        r.parsed_responses = j.at("responses").get<std::vector<std::string>>();
        r.compliant = j.at("compliant").get<bool>();
        r.attempts = j.at("attempts").get<int>();
        if (!j.at("failure_reason").is_null())
            r.failure_reason = parse_failure_reason(j.at("failure_reason").get<std::string>());
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::data, "BAD_RECORD", e.what());
    }
}

std::vector<TrialRecord> read_records(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, "NOT_FOUND", "cannot open record file " + path.string());
    std::vector<TrialRecord> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(record_from_json(line, vocab));
    return out;
}

std::size_t repair_record_file(const std::filesystem::path& path, const Vocabulary& vocab) {
    if (!std::filesystem::exists(path)) return 0;
    std::string content;
    {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        content = ss.str();
    }
    std::size_t keep = 0, count = 0, pos = 0;
    while (pos < content.size()) {
        const auto eol = content.find('\n', pos);
        if (eol == std::string::npos) break;
        try {
            record_from_json(std::string_view(content).substr(pos, eol - pos), vocab);
        } catch (const Error&) {
            break;
        }
        ++count;
        pos = keep = eol + 1;
    }
    if (keep != content.size()) std::filesystem::resize_file(path, keep);
    return count;
}

// ---------------------------------------------------------------------------
// Collection

double CollectionSummary::initial_compliance_rate() const {
    return total ? static_cast<double>(initially_compliant) / static_cast<double>(total) : 0.0;
}

double CollectionSummary::final_compliance_rate() const {
    return total ? static_cast<double>(compliant) / static_cast<double>(total) : 0.0;
}

void CollectionSummary::add(const TrialRecord& r, std::size_t vocab_size) {
    if (usable_per_cue.size() < vocab_size) usable_per_cue.resize(vocab_size, 0);
    ++total;
    if (r.compliant) {
        ++compliant;
        if (r.attempts == 1) ++initially_compliant;
        usable_per_cue.at(r.cue) += r.parsed_responses.size();
    }
}

void CollectionSummary::merge(const CollectionSummary& other) {
    total += other.total;
    initially_compliant += other.initially_compliant;
    compliant += other.compliant;
    if (usable_per_cue.size() < other.usable_per_cue.size()) usable_per_cue.resize(other.usable_per_cue.size(), 0);
    for (std::size_t i = 0; i < other.usable_per_cue.size(); ++i) usable_per_cue[i] += other.usable_per_cue[i];
}

CollectionSummary summarize(std::span<const TrialRecord> records, std::size_t vocab_size) {
    CollectionSummary s;
    s.usable_per_cue.assign(vocab_size, 0);
    for (const auto& r : records) s.add(r, vocab_size);
    return s;
}

namespace {

template <typename Trial, typename Run>
CollectionSummary collect_impl(std::span<const Trial> trials, const Vocabulary& vocab, const RunConfig& cfg,
                               RecordSink& sink, const CollectOptions& options, Run run) {
    CollectionSummary summary;
    summary.usable_per_cue.assign(vocab.size(), 0);
    const auto batch = static_cast<std::size_t>(cfg.collection.batch_size);
    std::vector<TrialRecord> results;
    for (std::size_t start = options.skip; start < trials.size(); start += batch) {
        const auto end = std::min(start + batch, trials.size());
        results.assign(end - start, TrialRecord{});
        parallel_for(end - start, options.workers, [&](std::size_t i) { results[i] = run(trials[start + i]); });
        for (const auto& r : results) {
            sink.append(r);
            summary.add(r, vocab.size());
        }
        sink.flush();
    }
    return summary;
}

}  // namespace

CollectionSummary collect(std::span<const FcTrial> trials, Participant& p, const Vocabulary& vocab,
                          const RunConfig& cfg, RecordSink& sink, const CollectOptions& options) {
    return collect_impl(trials, vocab, cfg, sink, options,
                        [&](const FcTrial& t) { return run_fc_trial(p, t, vocab, cfg); });
}

CollectionSummary collect(std::span<const FaTrial> trials, Participant& p, const Vocabulary& vocab,
                          const RunConfig& cfg, RecordSink& sink, const CollectOptions& options) {
    return collect_impl(trials, vocab, cfg, sink, options,
                        [&](const FaTrial& t) { return run_fa_trial(p, t, vocab, cfg); });
}

// ---------------------------------------------------------------------------
// Planted-geometry participant

namespace {

constexpr std::uint64_t kNoiseTag = 0x5151;

Eigen::MatrixXd gaussian_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index k = 0; k < g.cols(); ++k) g(i, k) = rng.normal();
    return g;
}

std::string rest_of_line(std::string_view text, std::size_t from) {
    auto eol = text.find('\n', from);
    return std::string(trim(text.substr(from, eol == std::string_view::npos ? std::string_view::npos : eol - from)));
}

}  // namespace

Eigen::MatrixXd planted_embeddings(std::size_t vocab_size, const PlantedGeometrySpec& spec) {
    if (spec.dim < 1) throw Error(ErrorKind::config, "BAD_SIMULATOR", "dim must be >= 1");
    if (!(spec.shared >= 0.0 && spec.shared <= 1.0))
        throw Error(ErrorKind::config, "BAD_SIMULATOR", "shared must be in [0, 1]");
    Eigen::MatrixXd e = std::sqrt(1.0 - spec.shared) * gaussian_rows(vocab_size, spec.dim, spec.seed);
    if (spec.shared > 0.0) e += std::sqrt(spec.shared) * gaussian_rows(vocab_size, spec.dim, spec.shared_seed);
    for (Eigen::Index i = 0; i < e.rows(); ++i) e.row(i).normalize();
    return e;
}

PlantedGeometryParticipant::PlantedGeometryParticipant(const Vocabulary& vocab, const RunConfig& cfg,
                                                       const PlantedGeometrySpec& spec)
    : vocab_(&vocab),
      n_picks_(cfg.paradigm.n_picks),
      fa_words_(cfg.paradigm.fa_words_per_run),
      spec_(spec),
      embeddings_(planted_embeddings(vocab.size(), spec)) {}

Eigen::MatrixXd PlantedGeometryParticipant::planted_similarity() const {
    Eigen::MatrixXd s = embeddings_ * embeddings_.transpose();
    s.diagonal().setOnes();
    return s;
}

std::vector<WordId> PlantedGeometryParticipant::sample(WordId cue, std::span<const WordId> pool, std::size_t n,
                                                       std::uint64_t seed) const {
    std::vector<WordId> items(pool.begin(), pool.end());
    std::vector<double> score(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) score[i] = embeddings_.row(cue).dot(embeddings_.row(items[i]));
    n = std::min(n, items.size());

    std::vector<WordId> picked;
    picked.reserve(n);
    if (spec_.tau <= 0.0) {
        std::vector<std::size_t> order(items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return score[a] != score[b] ? score[a] > score[b] : items[a] < items[b];
        });
        for (std::size_t i = 0; i < n; ++i) picked.push_back(items[order[i]]);
        return picked;
    }

    const double top = *std::max_element(score.begin(), score.end());
    std::vector<double> weight(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) weight[i] = std::exp((score[i] - top) / spec_.tau);

    SplitMix64 rng(seed);
    for (std::size_t draw = 0; draw < n; ++draw) {
        double total = 0.0;
        for (double w : weight) total += w;
        const double u = rng.uniform01() * total;
        double acc = 0.0;
        std::size_t chosen = weight.size();
        for (std::size_t i = 0; i < weight.size(); ++i) {
            if (weight[i] <= 0.0) continue;
            chosen = i;
            acc += weight[i];
            if (u < acc) break;
        }
        picked.push_back(items[chosen]);
        weight[chosen] = 0.0;
    }
    return picked;
}

std::string PlantedGeometryParticipant::complete(const std::string& prompt, const DecodeParams& decode) {
    const std::uint64_t seed =
        derive_seed(derive_seed(spec_.seed, kNoiseTag) ^ fnv1a(prompt), decode.seed.value_or(0));

    auto join = [&](const std::vector<WordId>& ids) {
        std::string out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i) out += ", ";
            out += vocab_->word(ids[i]);
        }
        return out;
    };

    if (auto at = prompt.rfind("input word: "); at != std::string::npos) {
        const auto cue = vocab_->find(rest_of_line(prompt, at + 12));
        const auto cand_at = prompt.find("candidates: [", at);
        if (!cue || cand_at == std::string::npos) return "I cannot answer that.";
        const auto close = prompt.find(']', cand_at);
        std::vector<WordId> pool;
        std::string_view list(prompt.data() + cand_at + 13, close - cand_at - 13);
        for (const auto& w : split_words(list))
            if (auto id = vocab_->find(w); id && *id != *cue) pool.push_back(*id);
        return "output: " + join(sample(*cue, pool, static_cast<std::size_t>(n_picks_), seed));
    }
    if (auto at = prompt.rfind("input: "); at != std::string::npos) {
        auto word = rest_of_line(prompt, at + 7);
        if (!word.empty() && word.back() == '.') word.pop_back();
        const auto cue = vocab_->find(word);
        if (!cue) return "I cannot answer that.";
        std::vector<WordId> pool;
        pool.reserve(vocab_->size() - 1);
        for (WordId w = 0; w < vocab_->size(); ++w)
            if (w != *cue) pool.push_back(w);
        return "output: " + join(sample(*cue, pool, static_cast<std::size_t>(fa_words_), seed)) + ".";
    }
    return "I cannot answer that.";
}

// ---------------------------------------------------------------------------
// Fault injection

FaultInjectingParticipant::FaultInjectingParticipant(std::shared_ptr<Participant> inner, double rate,
                                                     std::uint64_t seed)
    : inner_(std::move(inner)), rate_(rate), seed_(seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw Error(ErrorKind::config, "BAD_FAULT_RATE", "fault rate must be in [0, 1]");
}

std::string FaultInjectingParticipant::complete(const std::string& prompt, const DecodeParams& decode) {
    ++calls_;
    SplitMix64 rng(derive_seed(seed_ ^ fnv1a(prompt), decode.seed.value_or(0)));
    if (rng.uniform01() < rate_) {
        ++injected_;
        return "I think the most related words are these.";
    }
    return inner_->complete(prompt, decode);
}

// ---------------------------------------------------------------------------
// HTTP chat-completions participant

HttpChatParticipant::HttpChatParticipant(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    const auto& url = endpoint_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorKind::config, "BAD_URL", "endpoint URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    if (endpoint_.model.empty()) throw Error(ErrorKind::config, "BAD_ENDPOINT", "http participant needs a model name");
}

std::string HttpChatParticipant::complete(const std::string& prompt, const DecodeParams& decode) {
    decode.validate();
    json body;
    body["model"] = endpoint_.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    const bool greedy = decode.mode == DecodeMode::greedy;
    body["temperature"] = greedy ? 0.0 : decode.temperature;
    body["top_p"] = greedy ? 1.0 : decode.top_p;
    body["max_tokens"] = decode.max_new_tokens;
    if (decode.seed) body["seed"] = *decode.seed;

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(endpoint_.timeout_seconds, 0);
    client.set_read_timeout(endpoint_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv(endpoint_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res)
        throw Error(ErrorKind::transport, "TRANSPORT",
                    scheme_host_port_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(ErrorKind::transport, "TRANSPORT",
                    scheme_host_port_ + " returned HTTP " + std::to_string(res->status));
    try {
        const auto reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::transport, "TRANSPORT", std::string("malformed completion response: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Participant specs

namespace {

std::vector<std::pair<std::string, std::string>> parse_options(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        auto eq = item.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorKind::config, "BAD_PARTICIPANT", "expected key=value in '" + std::string(item) + "'");
        out.emplace_back(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::config, "BAD_PARTICIPANT", "bad number for " + key + ": '" + v + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        auto n = std::stoull(v, &used);
        if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::config, "BAD_PARTICIPANT", "bad integer for " + key + ": '" + v + "'");
}

}  // namespace

PlantedGeometrySpec parse_simulated_spec(std::string_view spec) {
    if (spec.rfind("simulated", 0) != 0)
        throw Error(ErrorKind::config, "BAD_PARTICIPANT", "not a simulated participant spec");
    PlantedGeometrySpec out;
    auto colon = spec.find(':');
    if (colon == std::string_view::npos) return out;
    for (const auto& [k, v] : parse_options(spec.substr(colon + 1))) {
        if (k == "tau") out.tau = to_double(k, v);
        else if (k == "dim") out.dim = to_u64(k, v);
        else if (k == "seed") out.seed = to_u64(k, v);
        else if (k == "shared") out.shared = to_double(k, v);
        else if (k == "shared_seed") out.shared_seed = to_u64(k, v);
        else if (k == "fault" || k == "fault_seed") continue;
        else throw Error(ErrorKind::config, "BAD_PARTICIPANT", "unknown simulator option '" + k + "'");
    }
    return out;
}

std::unique_ptr<Participant> make_participant(std::string_view spec, const Vocabulary& vocab, const RunConfig& cfg) {
    const auto colon = spec.find(':');
    const auto kind = spec.substr(0, colon);
    const auto opts = colon == std::string_view::npos ? decltype(parse_options("")){} : parse_options(spec.substr(colon + 1));

    if (kind == "simulated") {
        auto sim = std::make_unique<PlantedGeometryParticipant>(vocab, cfg, parse_simulated_spec(spec));
        double fault = 0.0;
        std::uint64_t fault_seed = 0;
        for (const auto& [k, v] : opts) {
            if (k == "fault") fault = to_double(k, v);
            if (k == "fault_seed") fault_seed = to_u64(k, v);
        }
        if (fault <= 0.0) return sim;
        return std::make_unique<FaultInjectingParticipant>(std::shared_ptr<Participant>(std::move(sim)), fault,
                                                           fault_seed);
    }
    if (kind == "http") {
        HttpEndpoint ep;
        for (const auto& [k, v] : opts) {
            if (k == "url") ep.base_url = v;
            else if (k == "model") ep.model = v;
            else if (k == "token_env") ep.token_env = v;
            else if (k == "timeout") ep.timeout_seconds = static_cast<int>(to_u64(k, v));
            else throw Error(ErrorKind::config, "BAD_PARTICIPANT", "unknown http option '" + k + "'");
        }
        return std::make_unique<HttpChatParticipant>(std::move(ep));
    }
    throw Error(ErrorKind::config, "BAD_PARTICIPANT",
                "unknown participant '" + std::string(spec) + "' (expected simulated:... or http:...)");
}

}  // namespace semgeom
