#pragma once

#include <array>
#include <string>
#include <vector>

#include "xadv/image.hpp"
#include "xadv/models.hpp"

namespace xadv {

struct PcaResult {
    std::vector<double> mean;
    // Top two principal directions, eigenvalue-descending; each direction's
    // largest-magnitude coordinate is made positive so the basis is unique.
    std::array<std::vector<double>, 2> components;
    std::array<double, 2> eigenvalues{};
    std::array<double, 2> explained_fraction{};
    std::vector<std::array<double, 2>> projections;  // one per input embedding
    std::array<double, 2> clean_projection{};
};

// Fits a 2-component PCA on the embeddings plus the clean embedding and
// projects all of them. Requires at least three embeddings, equal dimensions,
// and at least rank 2 (otherwise an error names the offending input).
PcaResult pca_project(const std::vector<std::vector<double>>& embeddings,
                      const std::vector<double>& clean_embedding);

// A cluster of projected augmented views, with the projected clean embedding
// as the common origin.
struct ClusterProjection {
    std::string method;
    std::vector<std::array<double, 2>> points;
    std::array<double, 2> origin{};
};

// Arithmetic mean of atan2(pc2 - origin2, pc1 - origin1) over the cluster, in
// radians. A point equal to the origin is an error naming its index. The
// plain mean of wrapped angles is the reported statistic; set circular=true
// to average on the circle (atan2 of mean sin/cos) instead.
double mean_angle(const ClusterProjection& cluster, bool circular = false);

// semantic mean angle minus the average of the pixel-method mean angles.
double angular_difference(double semantic_mean_angle,
                          const std::vector<double>& pixel_mean_angles);

// similarity[i][j] = 100 * max(0, cos(image_i embedding, text_j embedding)).
std::vector<std::vector<double>> similarity_table(
    EmbeddingScorer& scorer, const std::vector<std::pair<std::string, ImageBuffer>>& images,
    const std::vector<std::string>& texts);

void write_projection_csv(const std::vector<ClusterProjection>& clusters,
                          const std::string& path);
void write_angles_csv(const std::vector<std::pair<std::string, double>>& angles,
                      const std::string& path);
// Rows: semantic method, k (pixel-method count), angular difference.
struct AngularDifferenceRow {
    std::string semantic_method;
    int k = 0;
    double value = 0.0;
};
void write_angular_difference_csv(const std::vector<AngularDifferenceRow>& rows,
                                  const std::string& path);
void write_similarity_csv(const std::vector<std::string>& image_labels,
                          const std::vector<std::string>& text_labels,
                          const std::vector<std::vector<double>>& table, const std::string& path);

}  // namespace xadv
