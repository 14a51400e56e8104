#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tpsnet {

struct RetrievalScenario {
    int query_domain = 0;
    int gallery_domain = 1;
};

struct MetricsRow {
    RetrievalScenario scenario;
    int k = 0;
    double precision = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    // Arithmetic mean over scenarios, one entry per k.
    std::vector<std::pair<int, double>> averages;

    void write_csv(const std::string& path) const;
    std::string to_text() const;
};

// Mean over queries of the fraction of the top-k gallery items (by
// descending dot product, ties to the lower gallery index) sharing the
// query's label.
double precision_at_k(const Eigen::MatrixXd& query_embs, const std::vector<int>& query_labels,
                      const Eigen::MatrixXd& gallery_embs,
                      const std::vector<int>& gallery_labels, int k);

// Embeddings and labels for one domain, in dataset order.
struct DomainEmbeddings {
    int domain_id = 0;
    Eigen::MatrixXd embeddings;
    std::vector<int> labels;
};

// Every ordered pair of distinct domains at every requested k.
MetricsTable evaluate_scenarios(const std::vector<DomainEmbeddings>& domains,
                                const std::vector<int>& ks);

}  // namespace tpsnet
