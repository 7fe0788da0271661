#include "xadv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "xadv/image_io.hpp"

namespace xadv {

PcaResult pca_project(const std::vector<std::vector<double>>& embeddings,
                      const std::vector<double>& clean_embedding) {
    if (embeddings.size() < 3)
        throw Error("pca: need at least 3 embeddings, got " + std::to_string(embeddings.size()));
    const std::size_t dim = clean_embedding.size();
    if (dim < 2) throw Error("pca: embedding dimension must be >= 2");
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        if (embeddings[i].size() != dim)
            throw Error("pca: embedding " + std::to_string(i) + " has dimension " +
                        std::to_string(embeddings[i].size()) + ", expected " +
                        std::to_string(dim));

    // Fit on the augmented embeddings plus the clean one, so the clean point
    // projects into the same basis it helped define.
    const std::size_t n = embeddings.size() + 1;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = embeddings[i][j];
    for (std::size_t j = 0; j < dim; ++j)
        X(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(j)) = clean_embedding[j];

    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
    // Eigen returns eigenvalues ascending; the last two columns are the top-2.
    const Eigen::VectorXd evals = solver.eigenvalues();
    const Eigen::MatrixXd evecs = solver.eigenvectors();
    const auto last = static_cast<Eigen::Index>(dim) - 1;

    const double total = std::max(evals.sum(), 0.0);
    const double tol = 1e-12 * std::max(1.0, evals(last));
    if (evals(last - 1) <= tol)
        throw Error("pca: embeddings have rank < 2, cannot span a plane");

    PcaResult res;
    res.mean.assign(mean.data(), mean.data() + dim);
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v = evecs.col(last - k);
        // Deterministic sign: the largest-magnitude coordinate is positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        res.components[static_cast<std::size_t>(k)].assign(v.data(), v.data() + dim);
        res.eigenvalues[static_cast<std::size_t>(k)] = evals(last - k);
        res.explained_fraction[static_cast<std::size_t>(k)] =
            total > 0.0 ? evals(last - k) / total : 0.0;
    }

    const auto project = [&](const std::vector<double>& e) {
        std::array<double, 2> p{};
        for (int k = 0; k < 2; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j)
                s += (e[j] - res.mean[j]) * res.components[static_cast<std::size_t>(k)][j];
            p[static_cast<std::size_t>(k)] = s;
        }
        return p;
    };
    for (const auto& e : embeddings) res.projections.push_back(project(e));
    res.clean_projection = project(clean_embedding);
    return res;
}

double mean_angle(const ClusterProjection& cluster, bool circular) {
    if (cluster.points.empty()) throw Error("mean_angle: empty cluster " + cluster.method);
    double sum = 0.0;
    double sum_sin = 0.0;
    double sum_cos = 0.0;
    for (std::size_t i = 0; i < cluster.points.size(); ++i) {
        const double dx = cluster.points[i][0] - cluster.origin[0];
        const double dy = cluster.points[i][1] - cluster.origin[1];
        if (dx == 0.0 && dy == 0.0)
            throw Error("mean_angle: point " + std::to_string(i) + " of cluster " +
                        cluster.method + " coincides with the origin");
        const double a = std::atan2(dy, dx);
        sum += a;
        sum_sin += std::sin(a);
        sum_cos += std::cos(a);
    }
    if (circular) return std::atan2(sum_sin, sum_cos);
    return sum / static_cast<double>(cluster.points.size());
}

double angular_difference(double semantic_mean_angle,
                          const std::vector<double>& pixel_mean_angles) {
    if (pixel_mean_angles.empty()) throw Error("angular_difference: no pixel-method angles");
    double mean = 0.0;
    for (double a : pixel_mean_angles) mean += a;
    mean /= static_cast<double>(pixel_mean_angles.size());
    return semantic_mean_angle - mean;
}

std::vector<std::vector<double>> similarity_table(
    EmbeddingScorer& scorer, const std::vector<std::pair<std::string, ImageBuffer>>& images,
    const std::vector<std::string>& texts) {
    if (images.empty() || texts.empty()) throw Error("similarity_table: empty inputs");
    std::vector<std::vector<double>> text_emb;
    for (const std::string& t : texts) text_emb.push_back(scorer.embed_text(t));
    std::vector<std::vector<double>> table;
    for (const auto& [label, image] : images) {
        const std::vector<double> e = scorer.embed_image(image);
        std::vector<double> row;
        for (const auto& te : text_emb) row.push_back(100.0 * std::max(0.0, cosine(e, te)));
        table.push_back(std::move(row));
    }
    return table;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void write_text_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

}  // namespace

void write_projection_csv(const std::vector<ClusterProjection>& clusters,
                          const std::string& path) {
    std::ostringstream os;
    os << "method,pc1,pc2\n";
    if (!clusters.empty())
        os << "original," << fmt(clusters.front().origin[0]) << ','
           << fmt(clusters.front().origin[1]) << '\n';
    for (const ClusterProjection& c : clusters)
        for (const auto& p : c.points) os << c.method << ',' << fmt(p[0]) << ',' << fmt(p[1]) << '\n';
    write_text_atomic(path, os.str());
}

void write_angles_csv(const std::vector<std::pair<std::string, double>>& angles,
                      const std::string& path) {
    std::ostringstream os;
    os << "method,mean_angle_rad\n";
    for (const auto& [method, angle] : angles) os << method << ',' << fmt(angle) << '\n';
    write_text_atomic(path, os.str());
}

void write_angular_difference_csv(const std::vector<AngularDifferenceRow>& rows,
                                  const std::string& path) {
    std::ostringstream os;
    os << "semantic_method,k,angular_difference_rad\n";
    for (const AngularDifferenceRow& r : rows)
        os << r.semantic_method << ',' << r.k << ',' << fmt(r.value) << '\n';
    write_text_atomic(path, os.str());
}

void write_similarity_csv(const std::vector<std::string>& image_labels,
                          const std::vector<std::string>& text_labels,
                          const std::vector<std::vector<double>>& table, const std::string& path) {
    if (image_labels.size() != table.size())
        throw Error("similarity csv: label/table row mismatch");
    std::ostringstream os;
    os << "image";
    for (const std::string& t : text_labels) os << ',' << t;
    os << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i].size() != text_labels.size())
            throw Error("similarity csv: row " + std::to_string(i) + " width mismatch");
        os << image_labels[i];
        for (double v : table[i]) os << ',' << fmt(v);
        os << '\n';
    }
    write_text_atomic(path, os.str());
}

}  // namespace xadv
