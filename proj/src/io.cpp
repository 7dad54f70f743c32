#include "tdsim/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tdsim {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: byte-stable line endings
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

void write_matrix_csv(std::ostream& out, const std::string& index_name,
                      const std::string& value_prefix, int dim,
                      const std::function<void(std::ostream&)>& body) {
    out << index_name;
    for (int i = 1; i <= dim; ++i) out << ',' << value_prefix << i;
    out << '\n';
    body(out);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    auto out = open_out(path);
    out << content;
}

void write_segment_csv(const Segment& seg, const std::string& path) {
    auto out = open_out(path);
    write_matrix_csv(out, "theta", "v", seg.dim(), [&](std::ostream& o) {
        for (std::size_t i = 0; i < seg.knots().size(); ++i) {
            o << format_double(seg.knots()[i]);
            for (int d = 0; d < seg.dim(); ++d)
                o << ',' << format_double(seg.values()(d, static_cast<Eigen::Index>(i)));
            o << '\n';
        }
    });
}

Segment read_segment_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty segment csv");
    std::vector<double> knots;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        knots.push_back(std::stod(cell));
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (knots.size() < 2 || rows.front().empty())
        throw std::runtime_error("malformed segment csv: " + path);
    const int dim = static_cast<int>(rows.front().size());
    Eigen::MatrixXd values(dim, static_cast<Eigen::Index>(knots.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<int>(rows[i].size()) != dim)
            throw std::runtime_error("ragged segment csv: " + path);
        for (int d = 0; d < dim; ++d) values(d, static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(d)];
    }
    const double delay = -knots.front();
    return Segment(delay, std::move(knots), std::move(values));
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    auto out = open_out(path);
    write_matrix_csv(out, "t", "x", traj.dim(), [&](std::ostream& o) {
        const auto& init = traj.initial();
        for (std::size_t i = 0; i + 1 < init.knots().size(); ++i) {  // t = 0 row comes from states
            o << format_double(init.knots()[i]);
            for (int d = 0; d < traj.dim(); ++d)
                o << ',' << format_double(init.values()(d, static_cast<Eigen::Index>(i)));
            o << '\n';
        }
        for (std::size_t i = 0; i < traj.times().size(); ++i) {
            o << format_double(traj.times()[i]);
            for (int d = 0; d < traj.dim(); ++d)
                o << ',' << format_double(traj.states()(d, static_cast<Eigen::Index>(i)));
            o << '\n';
        }
    });
}

void write_trajectory_meta(const Trajectory& traj, const std::string& path) {
    json meta;
    meta["delay"] = traj.delay();
    meta["dim"] = traj.dim();
    write_text_file(path, meta.dump(2) + "\n");
}

Trajectory read_trajectory_csv(const std::string& csv_path, const std::string& meta_path) {
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw std::runtime_error("cannot open: " + meta_path);
    json meta = json::parse(meta_in);
    const double delay = meta.at("delay").get<double>();
    const int dim = meta.at("dim").get<int>();

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open: " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trajectory csv");

    std::vector<double> ts;
    std::vector<Eigen::VectorXd> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        ts.push_back(std::stod(cell));
        Eigen::VectorXd v(dim);
        for (int d = 0; d < dim; ++d) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("short row in trajectory csv");
            v(d) = std::stod(cell);
        }
        rows.push_back(std::move(v));
    }
    std::size_t zero = 0;
    while (zero < ts.size() && ts[zero] < 0.0) ++zero;
    if (zero == ts.size()) throw std::runtime_error("trajectory csv has no t >= 0 rows");

    std::vector<double> knots(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(zero + 1));
    Eigen::MatrixXd init_vals(dim, static_cast<Eigen::Index>(zero + 1));
    for (std::size_t i = 0; i <= zero; ++i)
        init_vals.col(static_cast<Eigen::Index>(i)) = rows[i];
    Segment initial(delay, std::move(knots), std::move(init_vals));

    std::vector<double> times(ts.begin() + static_cast<std::ptrdiff_t>(zero), ts.end());
    Eigen::MatrixXd states(dim, static_cast<Eigen::Index>(ts.size() - zero));
    for (std::size_t i = zero; i < ts.size(); ++i)
        states.col(static_cast<Eigen::Index>(i - zero)) = rows[i];
    return Trajectory(std::move(initial), std::move(times), std::move(states));
}

void write_sampled_run_csv(const SampledRun& run, const std::string& dir,
                           const std::string& prefix) {
    const std::string base = dir + "/" + prefix;
    write_trajectory_csv(run.plant, base + "plant.csv");
    write_trajectory_meta(run.plant, base + "plant.json");

    auto obs = open_out(base + "observer.csv");
    const int n = static_cast<int>(run.observer_values.rows());
    write_matrix_csv(obs, "t", "xhat", n, [&](std::ostream& o) {
        for (std::size_t j = 0; j < run.observer_times.size(); ++j) {
            o << format_double(run.observer_times[j]);
            for (int d = 0; d < n; ++d)
                o << ',' << format_double(run.observer_values(d, static_cast<Eigen::Index>(j)));
            o << '\n';
        }
    });

    auto part = open_out(base + "partition.csv");
    part << "j,t\n";
    for (std::size_t j = 0; j < run.partition.times.size(); ++j)
        part << j << ',' << format_double(run.partition.times[j]) << '\n';
}

std::string check_report_json(const CheckReport& report) {
    json j;
    j["checker"] = report.checker;
    j["samples"] = report.samples_tested;
    j["passed"] = report.passed;
    j["worst_margin"] = report.worst_margin;
    j["violations"] = json::array();
    for (const auto& v : report.violations)
        j["violations"].push_back({{"inequality", v.inequality},
                                   {"sample", v.sample},
                                   {"lhs", v.lhs},
                                   {"rhs", v.rhs},
                                   {"margin", v.margin}});
    j["flagged"] = json::array();
    for (const auto& f : report.flagged)
        j["flagged"].push_back(
            {{"inequality", f.inequality}, {"sample", f.sample}, {"reason", f.reason}});
    return j.dump(2) + "\n";
}

}  // namespace tdsim
