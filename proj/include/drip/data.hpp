#ifndef DRIP_DATA_HPP
#define DRIP_DATA_HPP

// Sample container: one row across all blocks is one i.i.d. draw of W.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drip/common.hpp"
#include "drip/csv.hpp"

namespace drip {

struct Dataset {
    Eigen::MatrixXd x; // n x d_x
    Eigen::MatrixXd z; // n x d_z
    std::map<std::string, Eigen::VectorXd> extra; // outcome, treatment, ... by name
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(x.rows()); }

    const Eigen::VectorXd& column(const std::string& name) const {
        auto it = extra.find(name);
        if (it == extra.end()) throw std::invalid_argument("dataset column not found: " + name);
        return it->second;
    }

    Dataset subset(const std::vector<int>& rows) const {
        Dataset out;
        out.seed = seed;
        out.x.resize(static_cast<long>(rows.size()), x.cols());
        out.z.resize(static_cast<long>(rows.size()), z.cols());
        for (size_t i = 0; i < rows.size(); ++i) {
            out.x.row(static_cast<long>(i)) = x.row(rows[i]);
            out.z.row(static_cast<long>(i)) = z.row(rows[i]);
        }
        for (const auto& [name, col] : extra) {
            Eigen::VectorXd v(rows.size());
            for (size_t i = 0; i < rows.size(); ++i) v[static_cast<long>(i)] = col[rows[i]];
            out.extra[name] = std::move(v);
        }
        return out;
    }
};

inline std::string dataset_to_csv(const Dataset& data) {
    std::vector<std::string> header;
    for (long c = 0; c < data.x.cols(); ++c) header.push_back("x_" + std::to_string(c));
    for (long c = 0; c < data.z.cols(); ++c) header.push_back("z_" + std::to_string(c));
    for (const auto& [name, col] : data.extra) header.push_back(name);
    CsvWriter w(header);
    for (int i = 0; i < data.n(); ++i) {
        std::vector<std::string> row;
        for (long c = 0; c < data.x.cols(); ++c) row.push_back(format_double(data.x(i, c)));
        for (long c = 0; c < data.z.cols(); ++c) row.push_back(format_double(data.z(i, c)));
        for (const auto& [name, col] : data.extra) row.push_back(format_double(col[i]));
        w.add_row(std::move(row));
    }
    return w.str();
}

inline Dataset dataset_from_csv(const CsvTable& table) {
    Dataset data;
    std::vector<int> xcols, zcols;
    std::vector<std::string> extras;
    for (const auto& h : table.header) {
        if (h.rfind("x_", 0) == 0) xcols.push_back(table.column(h));
        else if (h.rfind("z_", 0) == 0) zcols.push_back(table.column(h));
        else extras.push_back(h);
    }
    require(!xcols.empty() && !zcols.empty(), "dataset csv needs x_* and z_* columns");
    const long n = static_cast<long>(table.rows.size());
    data.x.resize(n, static_cast<long>(xcols.size()));
    data.z.resize(n, static_cast<long>(zcols.size()));
    for (const auto& name : extras) data.extra[name] = Eigen::VectorXd(n);
    for (long i = 0; i < n; ++i) {
        for (size_t c = 0; c < xcols.size(); ++c)
            data.x(i, static_cast<long>(c)) = std::stod(table.rows[i][xcols[c]]);
        for (size_t c = 0; c < zcols.size(); ++c)
            data.z(i, static_cast<long>(c)) = std::stod(table.rows[i][zcols[c]]);
        for (const auto& name : extras)
            data.extra[name][i] = std::stod(table.rows[i][table.column(name)]);
    }
    return data;
}

} // namespace drip

#endif
