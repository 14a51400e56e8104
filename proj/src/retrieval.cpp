#include "tpsnet/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tpsnet {

double precision_at_k(const Eigen::MatrixXd& query_embs, const std::vector<int>& query_labels,
                      const Eigen::MatrixXd& gallery_embs,
                      const std::vector<int>& gallery_labels, int k) {
    const Eigen::Index nq = query_embs.rows();
    const Eigen::Index ng = gallery_embs.rows();
    if (nq == 0) throw std::invalid_argument("precision_at_k: empty query set");
    if (k < 1 || k > ng) throw std::invalid_argument("precision_at_k: k out of range");
    if (static_cast<Eigen::Index>(query_labels.size()) != nq ||
        static_cast<Eigen::Index>(gallery_labels.size()) != ng)
        throw std::invalid_argument("precision_at_k: label count mismatch");

    double total = 0.0;
    std::vector<int> order(static_cast<size_t>(ng));
    for (Eigen::Index q = 0; q < nq; ++q) {
        Eigen::VectorXd scores = gallery_embs * query_embs.row(q).transpose();
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [&](int a, int b) {
                              if (scores(a) != scores(b)) return scores(a) > scores(b);
                              return a < b;
                          });
        int hits = 0;
        for (int i = 0; i < k; ++i)
            if (gallery_labels[order[i]] == query_labels[q]) ++hits;
        total += static_cast<double>(hits) / k;
    }
    return total / static_cast<double>(nq);
}

MetricsTable evaluate_scenarios(const std::vector<DomainEmbeddings>& domains,
                                const std::vector<int>& ks) {
    MetricsTable table;
    for (int k : ks) {
        double sum = 0.0;
        int count = 0;
        for (const auto& q : domains)
            for (const auto& g : domains) {
                if (q.domain_id == g.domain_id) continue;
                MetricsRow row;
                row.scenario = {q.domain_id, g.domain_id};
                row.k = k;
                row.precision = precision_at_k(q.embeddings, q.labels,
                                               g.embeddings, g.labels, k);
                sum += row.precision;
                ++count;
                table.rows.push_back(row);
            }
        table.averages.emplace_back(k, count > 0 ? sum / count : 0.0);
    }
    return table;
}

void MetricsTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics csv: " + path);
    out << "scenario,k,precision\n" << std::setprecision(17);
    for (const auto& r : rows)
        out << r.scenario.query_domain << "->" << r.scenario.gallery_domain << ","
            << r.k << "," << r.precision << "\n";
    for (const auto& [k, avg] : averages) out << "average," << k << "," << avg << "\n";
}

std::string MetricsTable::to_text() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "scenario      k   precision\n";
    for (const auto& r : rows)
        out << "  " << r.scenario.query_domain << " -> " << r.scenario.gallery_domain
            << "   " << std::setw(4) << r.k << "   " << r.precision << "\n";
    for (const auto& [k, avg] : averages)
        out << "  average  " << std::setw(4) << k << "   " << avg << "\n";
    return out.str();
}

}  // namespace tpsnet
