#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semgeom/config.hpp"
#include "semgeom/embeddings.hpp"
#include "semgeom/harness.hpp"
#include "semgeom/similarity.hpp"
#include "semgeom/vocab.hpp"

namespace semgeom {

// A model taking part in the study. An empty participant means its behavior
// comes from ingest-dataset rather than live collection.
struct ModelSpec {
    std::string id;
    std::string participant;
};

// The "pipeline" section of the config file. Relative paths are resolved
// against the config file's directory.
struct PipelineSpec {
    std::filesystem::path vocab;
    std::vector<ModelSpec> models;
    std::filesystem::path embeddings_dir;
    std::optional<std::filesystem::path> fasttext;  // .lemb or .ssim
    std::optional<std::filesystem::path> bert;
    std::vector<Strategy> strategies;  // empty: every strategy found on disk
};

struct PipelineConfig {
    RunConfig run;
    PipelineSpec pipeline;
};

PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json pipeline_spec_to_json(const PipelineSpec& spec);

// 16 hex digits of FNV-1a over the file bytes.
std::string file_hash(const std::filesystem::path& path);

// Stage bookkeeping in <out>/manifest.json. A stage is skipped when the
// config hash, every input hash and every recorded output hash still match.
class Manifest {
public:
    explicit Manifest(std::filesystem::path path);

    bool up_to_date(const std::string& stage, const std::string& config_hash,
                    const std::map<std::string, std::string>& inputs) const;
    void record(const std::string& stage, const std::string& config_hash, const std::map<std::string, std::string>& inputs,
                const std::vector<std::filesystem::path>& outputs);
    const nlohmann::json& data() const noexcept { return data_; }

private:
    void save() const;

    std::filesystem::path path_;
    nlohmann::json data_;
};

struct StageOptions {
    std::filesystem::path out_dir = "out";
    std::size_t workers = 1;
    bool resume = false;
    bool force = false;
    bool quiet = false;
    std::optional<std::string> participant_override;  // replaces every model's participant
    std::optional<std::filesystem::path> embeddings_from;
    std::optional<std::filesystem::path> dataset_from;
};

struct EmbeddingIndexEntry {
    std::filesystem::path path;
    std::string model_id;
    Strategy strategy;
    std::uint32_t layer;
    std::uint32_t dim;
};

// Orchestrates the stages over one output directory. Each stage reads the
// previous stages' files, so any stage can be rerun on its own.
class Pipeline {
public:
    Pipeline(PipelineConfig cfg, StageOptions options);

    void generate();
    void collect();
    void ingest_dataset();
    void aggregate();
    void geometry();
    void ingest_embeddings();
    void consensus();
    void evaluate();
    void regress();
    // All stages in order, then summary.json. Returns the summary.
    nlohmann::json run_all();
    nlohmann::json write_summary();

    const Vocabulary& vocab() const noexcept { return vocab_; }
    const RunConfig& run_config() const noexcept { return cfg_.run; }
    std::filesystem::path reports_dir() const;
    std::filesystem::path out_dir() const { return opt_.out_dir; }

private:
    using StageFn = std::function<std::vector<std::filesystem::path>()>;
    void stage(const std::string& name, const std::map<std::string, std::string>& inputs, const StageFn& fn);
    void log(const std::string& message) const;

    std::map<std::string, std::string> hash_inputs(const std::vector<std::filesystem::path>& files) const;
    std::string participant_for(const ModelSpec& m) const;
    std::vector<EmbeddingIndexEntry> embedding_index() const;
    std::vector<Strategy> target_strategies(const std::vector<EmbeddingIndexEntry>& index) const;
    std::vector<LayerEmbeddings> load_layers(const std::vector<EmbeddingIndexEntry>& index, const std::string& model,
                                             Strategy strategy) const;
    SimilarityMatrix static_reference(const std::optional<std::filesystem::path>& src, const char* tag,
                                      std::span<const WordId> fit_words) const;
    std::string mode_name() const;

    std::filesystem::path trials_path(Paradigm p) const;
    std::filesystem::path records_path(const std::string& model, Paradigm p) const;
    std::filesystem::path compliance_path(const std::string& model) const;
    std::filesystem::path counts_path(const std::string& model, Paradigm p) const;
    std::filesystem::path ingested_counts_path(const std::string& model, Paradigm p) const;
    std::filesystem::path geometry_path(const std::string& model, const std::string& tag) const;
    std::filesystem::path mode_dir() const;
    std::filesystem::path index_path() const;

    PipelineConfig cfg_;
    StageOptions opt_;
    Vocabulary vocab_;
    std::string config_hash_;
    Manifest manifest_;
};

}  // namespace semgeom
