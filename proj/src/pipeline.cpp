#include "semgeom/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "semgeom/behavior.hpp"
#include "semgeom/error.hpp"
#include "semgeom/evaluation.hpp"
#include "semgeom/parallel.hpp"
#include "semgeom/ridge.hpp"
#include "semgeom/rng.hpp"
#include "semgeom/trials.hpp"

namespace semgeom {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorKind::config, "BAD_CONFIG", message); }

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "IO", "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::data, "IO", "write failed for " + path.string());
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "IO", "cannot write " + path.string());
    return out;
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path))
        throw Error(ErrorKind::data, "MISSING_INPUT", what + " not found at " + path.string() + "; run the earlier stage first");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

double parse_number(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    return std::strtod(s.c_str(), nullptr);
}

json compliance_json(const CollectionSummary& s) {
    return json{{"trials", s.total},
                {"initially_compliant", s.initially_compliant},
                {"compliant", s.compliant},
                {"initial_compliance_rate", s.initial_compliance_rate()},
                {"final_compliance_rate", s.final_compliance_rate()}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

PipelineConfig parse_pipeline_config(const json& j, const fs::path& base_dir) {
    PipelineConfig cfg;
    j.get_to(cfg.run);
    cfg.run.validate();
    if (!j.contains("pipeline")) config_error("missing 'pipeline' section");
    const auto& p = j.at("pipeline");
    if (!p.is_object()) config_error("pipeline must be an object");
    for (const auto& [key, _] : p.items())
        if (key != "vocab" && key != "models" && key != "embeddings_dir" && key != "fasttext" && key != "bert" &&
            key != "strategies")
            config_error("unknown key '" + key + "' in pipeline");
    auto str = [&](const char* key) -> std::string {
        if (!p.contains(key) || !p.at(key).is_string()) config_error(std::string("pipeline.") + key + " must be a string");
        return p.at(key).get<std::string>();
    };
    cfg.pipeline.vocab = resolve(base_dir, str("vocab"));
    cfg.pipeline.embeddings_dir = resolve(base_dir, p.contains("embeddings_dir") ? str("embeddings_dir") : "embeddings");
    if (p.contains("fasttext")) cfg.pipeline.fasttext = resolve(base_dir, str("fasttext"));
    if (p.contains("bert")) cfg.pipeline.bert = resolve(base_dir, str("bert"));
    if (!p.contains("models") || !p.at("models").is_array() || p.at("models").empty())
        config_error("pipeline.models must be a non-empty array");
    for (const auto& m : p.at("models")) {
        if (!m.is_object() || !m.contains("id") || !m.at("id").is_string())
            config_error("each pipeline model needs a string 'id'");
        for (const auto& [key, _] : m.items())
            if (key != "id" && key != "participant") config_error("unknown key '" + key + "' in pipeline.models");
        ModelSpec spec{m.at("id").get<std::string>(), m.value("participant", std::string{})};
        if (spec.id.empty() || spec.id.find_first_of(",/\\") != std::string::npos)
            config_error("model id '" + spec.id + "' must be non-empty and free of ',', '/', '\\'");
        for (const auto& other : cfg.pipeline.models)
            if (other.id == spec.id) config_error("duplicate model id '" + spec.id + "'");
        cfg.pipeline.models.push_back(std::move(spec));
    }
    if (p.contains("strategies")) {
        if (!p.at("strategies").is_array()) config_error("pipeline.strategies must be an array");
        for (const auto& s : p.at("strategies")) {
            if (!s.is_string()) config_error("pipeline.strategies entries must be strings");
            cfg.pipeline.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        std::sort(cfg.pipeline.strategies.begin(), cfg.pipeline.strategies.end());
        cfg.pipeline.strategies.erase(std::unique(cfg.pipeline.strategies.begin(), cfg.pipeline.strategies.end()),
                                      cfg.pipeline.strategies.end());
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "NOT_FOUND", "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, "BAD_CONFIG", "config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_pipeline_config(j, fs::absolute(path).parent_path());
}

json pipeline_spec_to_json(const PipelineSpec& spec) {
    json models = json::array();
    for (const auto& m : spec.models) models.push_back({{"id", m.id}, {"participant", m.participant}});
    json strategies = json::array();
    for (auto s : spec.strategies) strategies.push_back(std::string(to_string(s)));
    json j{{"vocab", spec.vocab.string()},
           {"models", models},
           {"embeddings_dir", spec.embeddings_dir.string()},
           {"strategies", strategies}};
    if (spec.fasttext) j["fasttext"] = spec.fasttext->string();
    if (spec.bert) j["bert"] = spec.bert->string();
    return j;
}

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, "MISSING_INPUT", "cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h = fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
    }
    return hex16(h);
}

// ---------------------------------------------------------------------------
// Manifest

Manifest::Manifest(fs::path path) : path_(std::move(path)) {
    data_ = json{{"stages", json::object()}};
    std::ifstream in(path_);
    if (!in) return;
    try {
        in >> data_;
    } catch (const json::exception&) {
        data_ = json{{"stages", json::object()}};
    }
    if (!data_.contains("stages") || !data_["stages"].is_object()) data_["stages"] = json::object();
}

bool Manifest::up_to_date(const std::string& stage, const std::string& config_hash,
                          const std::map<std::string, std::string>& inputs) const {
    const auto& stages = data_.at("stages");
    if (!stages.contains(stage)) return false;
    const auto& s = stages.at(stage);
    if (s.value("config_hash", "") != config_hash) return false;
    if (s.value("inputs", json::object()) != json(inputs)) return false;
    for (const auto& [path, hash] : s.value("outputs", json::object()).items()) {
        if (!fs::is_regular_file(path)) return false;
        if (file_hash(path) != hash.get<std::string>()) return false;
    }
    return true;
}

void Manifest::record(const std::string& stage, const std::string& config_hash,
                      const std::map<std::string, std::string>& inputs, const std::vector<fs::path>& outputs) {
    json out = json::object();
    for (const auto& p : outputs) out[p.string()] = file_hash(p);
    data_["stages"][stage] = json{{"config_hash", config_hash},
                                  {"inputs", inputs},
                                  {"outputs", out},
                                  {"completed_at", utc_now()}};
    save();
}

void Manifest::save() const {
    const auto tmp = fs::path(path_.string() + ".tmp");
    write_text(tmp, data_.dump(2) + "\n");
    fs::rename(tmp, path_);
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig cfg, StageOptions options)
    : cfg_(std::move(cfg)),
      opt_(std::move(options)),
      vocab_(load_vocabulary(cfg_.pipeline.vocab)),
      manifest_((fs::create_directories(opt_.out_dir), opt_.out_dir / "manifest.json")) {
    cfg_.run.validate(vocab_.size());
    opt_.workers = std::max<std::size_t>(1, opt_.workers);
    // Centering only changes the evaluation stages, whose names carry the mode.
    RunConfig hashed = cfg_.run;
    hashed.centering_mode = CenteringMode::centered;
    config_hash_ = hex16(fnv1a(pipeline_spec_to_json(cfg_.pipeline).dump(), fnv1a(canonical_config_text(hashed))));
}

void Pipeline::log(const std::string& message) const {
    if (!opt_.quiet) std::cerr << "[semgeom] " << message << '\n';
}

std::string Pipeline::mode_name() const { return std::string(to_string(cfg_.run.centering_mode)); }

fs::path Pipeline::trials_path(Paradigm p) const {
    return opt_.out_dir / "trials" / (p == Paradigm::fc ? "fc_trials.jsonl" : "fa_trials.jsonl");
}
fs::path Pipeline::records_path(const std::string& model, Paradigm p) const {
    return opt_.out_dir / "records" / (model + "__" + std::string(to_string(p)) + ".jsonl");
}
fs::path Pipeline::compliance_path(const std::string& model) const {
    return opt_.out_dir / "records" / (model + "__compliance.json");
}
fs::path Pipeline::counts_path(const std::string& model, Paradigm p) const {
    return opt_.out_dir / "counts" / (model + "__" + std::string(to_string(p)) + ".bcoo");
}
fs::path Pipeline::ingested_counts_path(const std::string& model, Paradigm p) const {
    return opt_.out_dir / "counts" / "ingested" / (model + "__" + std::string(to_string(p)) + ".bcoo");
}
fs::path Pipeline::geometry_path(const std::string& model, const std::string& tag) const {
    return opt_.out_dir / "geometry" / (model + "__" + tag + ".ssim");
}
fs::path Pipeline::mode_dir() const { return opt_.out_dir / "geometry" / mode_name(); }
fs::path Pipeline::index_path() const { return opt_.out_dir / "embeddings" / "index.json"; }
fs::path Pipeline::reports_dir() const { return opt_.out_dir / "reports" / mode_name(); }

std::map<std::string, std::string> Pipeline::hash_inputs(const std::vector<fs::path>& files) const {
    std::map<std::string, std::string> out;
    for (const auto& f : files) {
        require_file(f, "input");
        out[f.string()] = file_hash(f);
    }
    return out;
}

std::string Pipeline::participant_for(const ModelSpec& m) const {
    return opt_.participant_override ? *opt_.participant_override : m.participant;
}

void Pipeline::stage(const std::string& name, const std::map<std::string, std::string>& inputs, const StageFn& fn) {
    if (!opt_.force && manifest_.up_to_date(name, config_hash_, inputs)) {
        log(name + ": up to date, skipped");
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto outputs = fn();
    manifest_.record(name, config_hash_, inputs, outputs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f s", secs);
    log(name + ": done in " + buf);
}

void Pipeline::generate() {
    stage("generate", hash_inputs({cfg_.pipeline.vocab}), [&] {
        const auto fc = generate_fc_trials(vocab_, cfg_.run);
        const auto fa = generate_fa_trials(vocab_, cfg_.run);
        {
            auto out = open_out(trials_path(Paradigm::fc));
            write_fc_manifest(out, fc, vocab_);
        }
        {
            auto out = open_out(trials_path(Paradigm::fa));
            write_fa_manifest(out, fa, vocab_);
        }
        log("generate: " + std::to_string(fc.size()) + " FC and " + std::to_string(fa.size()) + " FA trials");
        return std::vector<fs::path>{trials_path(Paradigm::fc), trials_path(Paradigm::fa)};
    });
}

void Pipeline::collect() {
    for (const auto& model : cfg_.pipeline.models) {
        const auto spec = participant_for(model);
        if (spec.empty()) {
            log("collect:" + model.id + ": no participant, expecting ingested data");
            continue;
        }
        auto inputs = hash_inputs({trials_path(Paradigm::fc), trials_path(Paradigm::fa)});
        inputs["participant"] = spec;
        stage("collect:" + model.id, inputs, [&] {
            auto participant = make_participant(spec, vocab_, cfg_.run);
            json summary{{"model", model.id}, {"participant", spec}};
            for (auto p : {Paradigm::fc, Paradigm::fa}) {
                const auto path = records_path(model.id, p);
                fs::create_directories(path.parent_path());
                std::size_t skip = 0;
                if (opt_.resume && fs::exists(path)) {
                    skip = repair_record_file(path, vocab_);
                    log("collect:" + model.id + ": resuming " + std::string(to_string(p)) + " after " +
                        std::to_string(skip) + " persisted trials");
                }
                JsonlSink sink(path, vocab_, skip > 0);
                CollectOptions co{opt_.workers, skip};
                std::ifstream in(trials_path(p));
                if (p == Paradigm::fc) {
                    const auto trials = read_fc_manifest(in, vocab_);
                    if (skip > trials.size()) throw Error(ErrorKind::data, "RESUME_MISMATCH", path.string() + " has more records than trials");
                    semgeom::collect(std::span(trials), *participant, vocab_, cfg_.run, sink, co);
                } else {
                    const auto trials = read_fa_manifest(in, vocab_);
                    if (skip > trials.size()) throw Error(ErrorKind::data, "RESUME_MISMATCH", path.string() + " has more records than trials");
                    semgeom::collect(std::span(trials), *participant, vocab_, cfg_.run, sink, co);
                }
                sink.flush();
                const auto records = read_records(path, vocab_);
                const auto s = summarize(records, vocab_.size());
                summary[std::string(to_string(p))] = compliance_json(s);
                log("collect:" + model.id + ": " + std::string(to_string(p)) + " " + std::to_string(s.compliant) + "/" +
                    std::to_string(s.total) + " compliant");
            }
            write_text(compliance_path(model.id), summary.dump(2) + "\n");
            return std::vector<fs::path>{records_path(model.id, Paradigm::fc), records_path(model.id, Paradigm::fa),
                                         compliance_path(model.id)};
        });
    }
}

void Pipeline::ingest_dataset() {
    if (!opt_.dataset_from) throw Error(ErrorKind::config, "MISSING_DATASET", "ingest-dataset needs --from <file.csv|file.jsonl>");
    const fs::path src = *opt_.dataset_from;
    stage("ingest-dataset", hash_inputs({src, cfg_.pipeline.vocab}), [&] {
        std::map<std::pair<std::string, Paradigm>, CueResponseMatrix> mats;
        auto add = [&](const std::string& model, const std::string& paradigm, const std::string& cue,
                       const std::vector<std::string>& responses, std::uint64_t count, std::size_t line) {
            if (model.empty()) throw Error(ErrorKind::data, "BAD_DATASET", "line " + std::to_string(line) + ": empty model");
            const auto p = parse_paradigm(paradigm);
            const auto id = vocab_.find(normalize_word(cue));
            if (!id)
                throw Error(ErrorKind::data, "UNKNOWN_CUE",
                            "line " + std::to_string(line) + ": cue '" + cue + "' is not in the vocabulary");
            auto [it, _] = mats.try_emplace({model, p}, vocab_.size());
            for (const auto& r : responses) {
                const auto w = normalize_word(r);
                if (!w.empty()) it->second.add(*id, w, count);
            }
        };
        std::ifstream in(src);
        if (!in) throw Error(ErrorKind::data, "MISSING_INPUT", "cannot read " + src.string());
        std::string line;
        std::size_t n = 0;
        if (src.extension() == ".jsonl") {
            while (std::getline(in, line)) {
                ++n;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                json j;
                try {
                    j = json::parse(line);
                    std::vector<std::string> responses;
                    if (j.contains("responses")) responses = j.at("responses").get<std::vector<std::string>>();
                    else responses.push_back(j.at("response").get<std::string>());
                    add(j.at("model").get<std::string>(), j.at("paradigm").get<std::string>(), j.at("cue").get<std::string>(),
                        responses, j.value("count", std::uint64_t{1}), n);
                } catch (const json::exception& e) {
                    throw Error(ErrorKind::data, "BAD_DATASET", "line " + std::to_string(n) + ": " + e.what());
                }
            }
        } else {
            if (!std::getline(in, line)) throw Error(ErrorKind::data, "BAD_DATASET", "empty dataset " + src.string());
            n = 1;
            const auto header = split_csv_line(line);
            auto col = [&](const char* name) -> std::optional<std::size_t> {
                const auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end()) return std::nullopt;
                return static_cast<std::size_t>(it - header.begin());
            };
            const auto c_model = col("model"), c_par = col("paradigm"), c_cue = col("cue"), c_resp = col("response"),
                       c_resps = col("responses"), c_count = col("count");
            if (!c_model || !c_par || !c_cue || (!c_resp && !c_resps))
                throw Error(ErrorKind::data, "BAD_DATASET",
                            "CSV header needs model,paradigm,cue and response or responses (optional count)");
            while (std::getline(in, line)) {
                ++n;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                const auto f = split_csv_line(line);
                if (f.size() != header.size())
                    throw Error(ErrorKind::data, "BAD_DATASET",
                                "line " + std::to_string(n) + ": expected " + std::to_string(header.size()) + " fields");
                std::vector<std::string> responses;
                if (c_resp) {
                    responses.push_back(f[*c_resp]);
                } else {
                    std::stringstream ss(f[*c_resps]);
                    for (std::string r; std::getline(ss, r, ';');) responses.push_back(r);
                }
                std::uint64_t count = 1;
                if (c_count) {
                    try {
                        count = std::stoull(f[*c_count]);
                    } catch (const std::exception&) {
                        throw Error(ErrorKind::data, "BAD_DATASET", "line " + std::to_string(n) + ": bad count");
                    }
                }
                add(f[*c_model], f[*c_par], f[*c_cue], responses, count, n);
            }
        }
        std::vector<fs::path> outputs;
        for (const auto& [key, m] : mats) {
            const auto path = ingested_counts_path(key.first, key.second);
            fs::create_directories(path.parent_path());
            save_counts_binary(m, path);
            outputs.push_back(path);
        }
        log("ingest-dataset: " + std::to_string(mats.size()) + " (model, paradigm) matrices");
        return outputs;
    });
}

void Pipeline::aggregate() {
    for (const auto& model : cfg_.pipeline.models) {
        const bool live = !participant_for(model).empty();
        std::vector<fs::path> inputs;
        for (auto p : {Paradigm::fc, Paradigm::fa}) {
            const auto src = live ? records_path(model.id, p) : ingested_counts_path(model.id, p);
            if (!fs::is_regular_file(src))
                throw Error(ErrorKind::data, "MISSING_BEHAVIOR",
                            "no behavior for model '" + model.id + "': expected " + src.string() +
                                (live ? " (run collect)" : " (run ingest-dataset)"));
            inputs.push_back(src);
        }
        stage("aggregate:" + model.id, hash_inputs(inputs), [&] {
            std::vector<fs::path> outputs;
            auto csv = open_out(opt_.out_dir / "counts" / (model.id + "__aggregated.csv"));
            bool header = true;
            for (auto p : {Paradigm::fc, Paradigm::fa}) {
                const CueResponseMatrix counts =
                    live ? aggregate_counts(read_records(records_path(model.id, p), vocab_), vocab_, p)
                         : load_counts_binary(ingested_counts_path(model.id, p));
                if (counts.rows() != vocab_.size())
                    throw Error(ErrorKind::data, "VOCAB_MISMATCH", "count matrix rows do not match the vocabulary");
                save_counts_binary(counts, counts_path(model.id, p));
                auto coo = counts_path(model.id, p).replace_extension(".coo");
                save_coo(counts, vocab_, coo);
                write_aggregated_csv(csv, model.id, p, counts, vocab_, header);
                header = false;
                outputs.push_back(counts_path(model.id, p));
                outputs.push_back(coo);
            }
            csv.close();
            outputs.push_back(opt_.out_dir / "counts" / (model.id + "__aggregated.csv"));
            return outputs;
        });
    }
}

void Pipeline::geometry() {
    for (const auto& model : cfg_.pipeline.models) {
        stage("geometry:" + model.id, hash_inputs({counts_path(model.id, Paradigm::fc), counts_path(model.id, Paradigm::fa)}),
              [&] {
                  std::vector<fs::path> outputs;
                  for (auto p : {Paradigm::fc, Paradigm::fa}) {
                      const std::string pname(to_string(p));
                      const auto counts = load_counts_binary(counts_path(model.id, p));
                      const auto weights = ppmi(counts);
                      auto save = [&](const SimilarityMatrix& s) {
                          const auto path = geometry_path(model.id, s.tag());
                          fs::create_directories(path.parent_path());
                          save_similarity(s, path);
                          outputs.push_back(path);
                      };
                      save(cosine_rows(weights, pname + "_PPMI"));
                      save(cosine_rows(raw_weights(counts), pname + "_counts"));
                      const auto max_rank = std::min(vocab_.size(), counts.cols());
                      for (int k : cfg_.run.svd_ranks) {
                          if (static_cast<std::size_t>(k) > max_rank) {
                              log("geometry:" + model.id + ": skipping " + pname + " SVD K=" + std::to_string(k) +
                                  " (> min(|V|, columns) = " + std::to_string(max_rank) + ")");
                              continue;
                          }
                          save(svd_embed(weights, k, pname + "_SVD_" + std::to_string(k)).similarity);
                      }
                  }
                  return outputs;
              });
    }
}

void Pipeline::ingest_embeddings() {
    const fs::path dir = opt_.embeddings_from ? *opt_.embeddings_from : cfg_.pipeline.embeddings_dir;
    const std::string pattern = "<model>__<strategy>__L<layer>.lemb (e.g. " +
                                embedding_file_name("my-model", Strategy::meaning, 1) + ")";
    if (!fs::is_directory(dir))
        throw Error(ErrorKind::data, "MISSING_EMBEDDINGS",
                    "embeddings directory '" + dir.string() + "' does not exist; expected one LEMB file per layer named " +
                        pattern);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".lemb") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw Error(ErrorKind::data, "MISSING_EMBEDDINGS",
                    "embeddings directory '" + dir.string() + "' contains no *.lemb files; expected " + pattern);
    auto inputs = hash_inputs(files);
    stage("ingest-embeddings", inputs, [&] {
        std::vector<std::pair<EmbeddingHeader, fs::path>> headers;
        for (const auto& f : files) {
            auto h = read_embedding_header(f);
            if (h.vocab_size != vocab_.size())
                throw Error(ErrorKind::data, "VOCAB_MISMATCH",
                            f.string() + " has " + std::to_string(h.vocab_size) + " rows, vocabulary has " +
                                std::to_string(vocab_.size()));
            headers.emplace_back(std::move(h), fs::absolute(f));
        }
        std::sort(headers.begin(), headers.end(), [](const auto& a, const auto& b) {
            return std::tie(a.first.model_id, a.first.strategy, a.first.layer) <
                   std::tie(b.first.model_id, b.first.strategy, b.first.layer);
        });
        json entries = json::array();
        for (std::size_t i = 0; i < headers.size(); ++i) {
            const auto& [h, path] = headers[i];
            if (i > 0) {
                const auto& prev = headers[i - 1].first;
                if (prev.model_id == h.model_id && prev.strategy == h.strategy && prev.layer == h.layer)
                    throw Error(ErrorKind::data, "DUPLICATE_LAYER",
                                "two files hold " + hidden_tag(h.model_id, h.strategy, h.layer));
            }
            entries.push_back(json{{"path", path.string()},
                                   {"model", h.model_id},
                                   {"strategy", std::string(to_string(h.strategy))},
                                   {"layer", h.layer},
                                   {"dim", h.dim},
                                   {"hash", file_hash(path)}});
        }
        write_text(index_path(), entries.dump(2) + "\n");
        log("ingest-embeddings: " + std::to_string(entries.size()) + " layer files");
        return std::vector<fs::path>{index_path()};
    });
}

std::vector<EmbeddingIndexEntry> Pipeline::embedding_index() const {
    require_file(index_path(), "embedding index");
    std::ifstream in(index_path());
    json j;
    in >> j;
    std::vector<EmbeddingIndexEntry> out;
    for (const auto& e : j)
        out.push_back({e.at("path").get<std::string>(), e.at("model").get<std::string>(),
                       parse_strategy(e.at("strategy").get<std::string>()), e.at("layer").get<std::uint32_t>(),
                       e.at("dim").get<std::uint32_t>()});
    return out;
}

std::vector<Strategy> Pipeline::target_strategies(const std::vector<EmbeddingIndexEntry>& index) const {
    std::vector<Strategy> out;
    for (auto s : {Strategy::averaged, Strategy::meaning, Strategy::task_fc, Strategy::task_fa}) {
        if (!cfg_.pipeline.strategies.empty() &&
            std::find(cfg_.pipeline.strategies.begin(), cfg_.pipeline.strategies.end(), s) ==
                cfg_.pipeline.strategies.end())
            continue;
        const bool present = std::any_of(index.begin(), index.end(), [&](const auto& e) {
            if (e.strategy != s) return false;
            return std::any_of(cfg_.pipeline.models.begin(), cfg_.pipeline.models.end(),
                               [&](const ModelSpec& m) { return m.id == e.model_id; });
        });
        if (present) out.push_back(s);
    }
    if (out.empty())
        throw Error(ErrorKind::data, "MISSING_EMBEDDINGS", "no embeddings for any configured model and strategy");
    return out;
}

std::vector<LayerEmbeddings> Pipeline::load_layers(const std::vector<EmbeddingIndexEntry>& index,
                                                   const std::string& model, Strategy strategy) const {
    std::vector<LayerEmbeddings> out;
    for (const auto& e : index)
        if (e.model_id == model && e.strategy == strategy) out.push_back(load_embeddings(e.path, vocab_.size()));
    return out;
}

SimilarityMatrix Pipeline::static_reference(const std::optional<fs::path>& src, const char* tag,
                                            std::span<const WordId> fit_words) const {
    if (!src)
        throw Error(ErrorKind::config, "MISSING_REFERENCE",
                    std::string("pipeline.") + (std::string(tag) == "FT" ? "fasttext" : "bert") +
                        " must name a .lemb or .ssim file");
    SimilarityMatrix s;
    if (src->extension() == ".ssim") {
        s = load_similarity(*src);
        if (s.size() != vocab_.size())
            throw Error(ErrorKind::data, "VOCAB_MISMATCH", src->string() + " does not match the vocabulary");
    } else {
        s = hidden_similarity(apply_centering(load_embeddings(*src, vocab_.size()), cfg_.run.centering_mode, fit_words));
    }
    s.set_tag(tag);
    return s;
}

void Pipeline::consensus() {
    const auto index = embedding_index();
    std::vector<fs::path> inputs{index_path()};
    for (const auto& src : {cfg_.pipeline.fasttext, cfg_.pipeline.bert})
        if (src) inputs.push_back(*src);
    stage("consensus[" + mode_name() + "]", hash_inputs(inputs), [&] {
        std::vector<fs::path> outputs;
        fs::create_directories(mode_dir());
        for (const auto& [src, tag] : {std::pair{cfg_.pipeline.fasttext, "FT"}, std::pair{cfg_.pipeline.bert, "BERT"}}) {
            const auto path = mode_dir() / (std::string(tag) + ".ssim");
            save_similarity(static_reference(src, tag, {}), path);
            outputs.push_back(path);
        }
        for (auto strategy : target_strategies(index)) {
            for (const auto& model : cfg_.pipeline.models) {
                if (load_layers(index, model.id, strategy).empty()) continue;
                std::vector<LayerEmbeddings> others;
                for (const auto& e : index)
                    if (e.strategy == strategy && e.model_id != model.id)
                        others.push_back(load_embeddings(e.path, vocab_.size()));
                if (others.empty())
                    throw Error(ErrorKind::data, "NO_CONSENSUS",
                                "consensus for '" + model.id + "' (" + std::string(to_string(strategy)) +
                                    ") needs embeddings from at least one other model");
                auto s = semgeom::consensus(others, model.id, cfg_.run.centering_mode);
                s.set_tag("consensus");
                const auto path = mode_dir() / ("consensus__" + model.id + "__" + std::string(to_string(strategy)) + ".ssim");
                save_similarity(s, path);
                outputs.push_back(path);
            }
        }
        return outputs;
    });
}

void Pipeline::evaluate() {
    const auto index = embedding_index();
    const auto strategies = target_strategies(index);
    std::vector<fs::path> inputs{index_path(), mode_dir() / "FT.ssim", mode_dir() / "BERT.ssim"};
    for (const auto& m : cfg_.pipeline.models)
        for (const auto* tag : {"FC_PPMI", "FA_PPMI"}) inputs.push_back(geometry_path(m.id, tag));
    stage("evaluate[" + mode_name() + "]", hash_inputs(inputs), [&] {
        const auto ft = load_similarity(mode_dir() / "FT.ssim");
        const auto bert = load_similarity(mode_dir() / "BERT.ssim");
        std::vector<ReportRow> rows;
        std::vector<SummaryRow> summary;
        std::vector<std::tuple<std::string, std::string, Exclusion>> excluded;
        for (const auto& model : cfg_.pipeline.models) {
            std::vector<SimilarityMatrix> behavior;
            for (const std::string p : {"FC", "FA"}) behavior.push_back(load_similarity(geometry_path(model.id, p + "_PPMI")));
            for (const std::string p : {"FC", "FA"})
                for (int k : cfg_.run.svd_ranks) {
                    const auto path = geometry_path(model.id, p + "_SVD_" + std::to_string(k));
                    if (fs::is_regular_file(path)) behavior.push_back(load_similarity(path));
                }
            for (auto strategy : strategies) {
                const auto layers_raw = load_layers(index, model.id, strategy);
                if (layers_raw.empty()) continue;
                const std::string sname(to_string(strategy));
                const auto cons = load_similarity(mode_dir() / ("consensus__" + model.id + "__" + sname + ".ssim"));
                std::vector<const SimilarityMatrix*> refs;
                refs.push_back(&behavior[0]);
                refs.push_back(&behavior[1]);
                refs.push_back(&ft);
                refs.push_back(&bert);
                refs.push_back(&cons);
                for (std::size_t i = 2; i < behavior.size(); ++i) refs.push_back(&behavior[i]);

                std::vector<SimilarityMatrix> hidden(layers_raw.size());
                parallel_for(layers_raw.size(), opt_.workers, [&](std::size_t i) {
                    hidden[i] = hidden_similarity(apply_centering(layers_raw[i], cfg_.run.centering_mode));
                });
                std::vector<LayerInput> layers;
                std::vector<const SimilarityMatrix*> all = refs;
                for (std::size_t i = 0; i < hidden.size(); ++i) {
                    layers.push_back({layers_raw[i].layer, &hidden[i]});
                    all.push_back(&hidden[i]);
                }
                const auto mask = union_mask(all);
                const auto seed = derive_seed(cfg_.run.master_seed, fnv1a("pairs:" + model.id + "/" + sname));
                const auto pairs = sample_pairs(vocab_.size(), static_cast<std::size_t>(cfg_.run.rsa_sample_pairs), seed, mask);
                auto profile = layer_profile(model.id, sname, layers, refs, cfg_.run, pairs, {true, opt_.workers});
                rows.insert(rows.end(), profile.rows.begin(), profile.rows.end());
                summary.insert(summary.end(), profile.summary.begin(), profile.summary.end());
                for (auto& e : profile.excluded) excluded.emplace_back(model.id, sname, std::move(e));
            }
        }
        fs::create_directories(reports_dir());
        {
            auto out = open_out(reports_dir() / "rsa_nn.csv");
            write_report_csv(out, rows);
        }
        {
            auto out = open_out(reports_dir() / "rsa_nn_summary.csv");
            write_summary_csv(out, summary);
        }
        {
            auto out = open_out(reports_dir() / "exclusions.csv");
            out << "model,strategy,layer,reference,reason\n";
            for (const auto& [m, s, e] : excluded)
                out << m << ',' << s << ',' << e.layer << ',' << e.reference << ',' << e.reason << '\n';
        }
        return std::vector<fs::path>{reports_dir() / "rsa_nn.csv", reports_dir() / "rsa_nn_summary.csv",
                                     reports_dir() / "exclusions.csv"};
    });
}

void Pipeline::regress() {
    const auto index = embedding_index();
    const auto strategies = target_strategies(index);
    std::vector<fs::path> inputs{index_path()};
    for (const auto& src : {cfg_.pipeline.fasttext, cfg_.pipeline.bert})
        if (src) inputs.push_back(*src);
    for (const auto& m : cfg_.pipeline.models)
        for (const auto* tag : {"FC_counts", "FA_counts"}) inputs.push_back(geometry_path(m.id, tag));
    stage("regress[" + mode_name() + "]", hash_inputs(inputs), [&] {
        const auto& rp = cfg_.run.ridge;
        const auto split = split_vocab(vocab_.size(), rp.train_fraction, derive_seed(cfg_.run.master_seed, fnv1a("ridge-split")));
        const auto pair_seed = derive_seed(cfg_.run.master_seed, fnv1a("ridge-pairs"));
        const auto ft = static_reference(cfg_.pipeline.fasttext, "FT", split.train);
        const auto bert = static_reference(cfg_.pipeline.bert, "BERT", split.train);

        fs::create_directories(reports_dir());
        auto csv = open_out(reports_dir() / "ridge.csv");
        auto summary = open_out(reports_dir() / "ridge_summary.csv");
        bool header = true;
        for (const auto& model : cfg_.pipeline.models) {
            const auto fc = load_similarity(geometry_path(model.id, "FC_counts"));
            const auto fa = load_similarity(geometry_path(model.id, "FA_counts"));
            for (auto strategy : strategies) {
                const auto layers = load_layers(index, model.id, strategy);
                if (layers.empty()) continue;
                const std::string sname(to_string(strategy));
                std::vector<LayerEmbeddings> others;
                for (const auto& e : index)
                    if (e.strategy == strategy && e.model_id != model.id)
                        others.push_back(load_embeddings(e.path, vocab_.size()));
                if (others.empty())
                    throw Error(ErrorKind::data, "NO_CONSENSUS",
                                "ridge consensus for '" + model.id + "' needs embeddings from another model");
                auto cons = semgeom::consensus(others, model.id, cfg_.run.centering_mode, split.train);
                cons.set_tag("consensus");
                Predictors preds{&ft, &bert, &cons, &fc, &fa};

                std::vector<RidgeLayerResult> results(layers.size());
                parallel_for(layers.size(), opt_.workers, [&](std::size_t i) {
                    const auto features = build_features(split, preds, layers[i], static_cast<std::size_t>(rp.n_train_pairs),
                                                         pair_seed, cfg_.run.centering_mode);
                    const auto cv_seed = derive_seed(cfg_.run.master_seed,
                                                     fnv1a("ridge-cv:" + model.id + "/" + sname + "/" + std::to_string(layers[i].layer)));
                    results[i] = ridge_layer(layers[i].layer, features, cfg_.run, cv_seed);
                });
                write_ridge_csv(csv, model.id, sname, results, header);
                write_ridge_summary_csv(summary, model.id, sname, results, header);
                header = false;
            }
        }
        if (header) {
            write_ridge_csv(csv, "", "", {}, true);
            write_ridge_summary_csv(summary, "", "", {}, true);
        }
        csv.close();
        summary.close();
        return std::vector<fs::path>{reports_dir() / "ridge.csv", reports_dir() / "ridge_summary.csv"};
    });
}

json Pipeline::write_summary() {
    ordered_json s;
    s["centering"] = mode_name();
    s["config_hash"] = config_hash_;
    s["vocab_size"] = vocab_.size();
    ordered_json compliance = ordered_json::object();
    for (const auto& m : cfg_.pipeline.models) {
        if (!fs::is_regular_file(compliance_path(m.id))) continue;
        std::ifstream in(compliance_path(m.id));
        json j;
        in >> j;
        compliance[m.id] = ordered_json{{"FC", j.at("FC")}, {"FA", j.at("FA")}};
    }
    s["compliance"] = compliance;

    auto read_csv = [](const fs::path& path) {
        std::vector<std::vector<std::string>> rows;
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line))
            if (!line.empty()) rows.push_back(split_csv_line(line));
        return rows;
    };
    ordered_json rsa = ordered_json::array(), nn = ordered_json::array(), ridge = ordered_json::array();
    if (fs::is_regular_file(reports_dir() / "rsa_nn_summary.csv")) {
        // model,strategy,reference,metric,k_or_null,min,max,mean,n_layers
        for (const auto& r : read_csv(reports_dir() / "rsa_nn_summary.csv")) {
            if (r.size() != 9) continue;
            ordered_json row{{"model", r[0]}, {"strategy", r[1]}, {"reference", r[2]}};
            if (r[3] == "nn") row["k"] = std::stoi(r[4]);
            row["mean"] = parse_number(r[7]);
            row["min"] = parse_number(r[5]);
            row["max"] = parse_number(r[6]);
            row["n_layers"] = std::stoul(r[8]);
            (r[3] == "rsa" ? rsa : nn).push_back(std::move(row));
        }
    }
    if (fs::is_regular_file(reports_dir() / "ridge_summary.csv")) {
        // model,strategy,quantity,min,max,mean,n_layers
        for (const auto& r : read_csv(reports_dir() / "ridge_summary.csv")) {
            if (r.size() != 7) continue;
            ridge.push_back(ordered_json{{"model", r[0]},
                                         {"strategy", r[1]},
                                         {"quantity", r[2]},
                                         {"mean", parse_number(r[5])},
                                         {"min", parse_number(r[3])},
                                         {"max", parse_number(r[4])},
                                         {"n_layers", std::stoul(r[6])}});
        }
    }
    s["rsa"] = rsa;
    s["nn"] = nn;
    s["ridge"] = ridge;
    const auto path = reports_dir() / "summary.json";
    write_text(path, s.dump(2) + "\n");
    return json::parse(s.dump());
}

json Pipeline::run_all() {
    generate();
    collect();
    aggregate();
    geometry();
    ingest_embeddings();
    consensus();
    evaluate();
    regress();
    return write_summary();
}

}  // namespace semgeom
