#ifndef KMA_IO_HPP
#define KMA_IO_HPP

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "kma/averaging.hpp"
#include "kma/control.hpp"
#include "kma/dynamics.hpp"
#include "kma/edmd.hpp"
#include "kma/features.hpp"
#include "kma/training.hpp"

namespace kma::io {

namespace fs = std::filesystem;

// All floating-point output uses 17 significant digits, so save/load
// round-trips are bit exact.
std::string format_double(double v);

// ---- model files -----------------------------------------------------------

// Saves {A, B, C, sigma_x, sigma_z, feature_map} with kind "linear_embedding".
void save_model(const fs::path& path, const LinearEmbeddingModel& model,
                const StateLift& lift);

// Saves the averaged model: the model-schema fields (A, B, C = weighted sums,
// averaged noise) plus the product matrices CA, CB and the weight vector.
// Predictions from a loaded weighted file always use CA/CB.
void save_weighted_model(const fs::path& path, const WeightedModel& wm,
                         const ModelEnsemble& ensemble, const StateLift& lift);

struct ModelFile {
    enum class Kind { linear_embedding, weighted };
    Kind kind = Kind::linear_embedding;
    std::shared_ptr<const StateLift> lift;
    LinearEmbeddingModel model;  // linear_embedding only
    WeightedModel weighted;      // weighted only
    Matrix C;                    // decoder (averaged for weighted files)

    // Uniform prediction interface: single models are wrapped into the
    // degenerate weighted form.
    WeightedModel as_weighted() const;
};

ModelFile load_model(const fs::path& path);

std::shared_ptr<StateLift> feature_map_from_json_file(const fs::path& path);

// ---- datasets --------------------------------------------------------------

// CSV columns: traj_id, step, partition, x0..x{n-1}, u0..u{p-1}. Each
// trajectory contributes traj_len + 1 rows; the successor y of a row is the
// next row's state. The terminal row of a trajectory has zero u placeholders.
void save_dataset_csv(const fs::path& path, const Dataset& dataset);
void save_dataset_meta(const fs::path& path, const Dataset& dataset);
Dataset load_dataset(const fs::path& csv_path, const fs::path& meta_path);

// ---- reports ---------------------------------------------------------------

// Columns: epoch, train_loss, val_loss.
void save_train_report_csv(const fs::path& path, const TrainReport& report);

// {"elpd": [...], "w": [...], "n_heldout": m}
void save_weights_report(const fs::path& path, const Vector& elpds,
                         const Vector& w, std::size_t n_heldout);

// Columns: step, t, x_true..., x_pred..., u...
void save_prediction_csv(const fs::path& path,
                         const std::vector<Vector>& true_states,
                         const std::vector<Vector>& predicted_states,
                         const std::vector<Vector>& inputs, double dt);

// Columns: t, x0..x{n-1}, u0..u{p-1}[, r].
void save_closed_loop_csv(const fs::path& path, const ClosedLoopResult& result,
                          const ReferenceFn* reference);

void save_json(const fs::path& path, const std::string& serialized);
std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& content);

}  // namespace kma::io

#endif
