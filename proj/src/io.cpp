#include "realtraj/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "realtraj/config.hpp"

namespace realtraj {

namespace {

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out << (i ? "," : "") << cells[i];
    }
    out << '\n';
}

void finish(std::ofstream& out, const std::string& path)
{
    out.flush();
    if (!out) {
        throw std::runtime_error("write to '" + path + "' failed");
    }
}

}  // namespace

std::vector<double> CsvTable::column(const std::string& name) const
{
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) {
            std::vector<double> out;
            out.reserve(rows.size());
            for (const auto& r : rows) {
                out.push_back(r[c]);
            }
            return out;
        }
    }
    throw std::out_of_range("csv: no column '" + name + "'");
}

std::vector<std::string> trajectory_columns(Channel channel, bool with_truth)
{
    std::vector<std::string> cols{"t", "x_c", "y_c", "z_c", "purity"};
    switch (channel) {
    case Channel::counter:
        cols.emplace_back("count");
        break;
    case Channel::receiver:
        cols.emplace_back("voltage");
        break;
    case Channel::receiver_current:
        cols.emplace_back("current");
        break;
    }
    if (with_truth) {
        cols.insert(cols.end(), {"x_true", "y_true", "z_true"});
    }
    return cols;
}

void emit_trajectory(const TrajectoryRecord& record, Channel channel, const std::string& path)
{
    const bool truth = !record.x_true.empty();
    auto out = open_out(path);
    write_row(out, trajectory_columns(channel, truth));
    for (std::size_t i = 0; i < record.size(); ++i) {
        std::vector<std::string> cells{format_double(record.times[i]), format_double(record.x[i]),
                                       format_double(record.y[i]), format_double(record.z[i]),
                                       format_double(record.purity[i])};
        if (channel == Channel::counter) {
            cells.push_back(std::to_string(record.counts.at(i)));
        } else {
            cells.push_back(format_double(record.voltage.at(i)));
        }
        if (truth) {
            cells.push_back(format_double(record.x_true.at(i)));
            cells.push_back(format_double(record.y_true.at(i)));
            cells.push_back(format_double(record.z_true.at(i)));
        }
        write_row(out, cells);
    }
    finish(out, path);
}

void emit_events(const std::vector<double>& avalanche_times, const std::string& path)
{
    auto out = open_out(path);
    out << "t_avalanche\n";
    for (double t : avalanche_times) {
        out << format_double(t) << '\n';
    }
    finish(out, path);
}

void emit_ensemble(const EnsembleStats& stats, const std::string& path)
{
    auto out = open_out(path);
    write_row(out, {"t", "mean_x", "mean_y", "mean_z", "se_x", "se_y", "se_z", "mean_purity", "se_purity"});
    for (std::size_t i = 0; i < stats.times.size(); ++i) {
        write_row(out, {format_double(stats.times[i]), format_double(stats.mean_x[i]), format_double(stats.mean_y[i]),
                        format_double(stats.mean_z[i]), format_double(stats.se_x[i]), format_double(stats.se_y[i]),
                        format_double(stats.se_z[i]), format_double(stats.mean_purity[i]),
                        format_double(stats.se_purity[i])});
    }
    finish(out, path);
}

void emit_table(const std::vector<SweepRow>& rows, const std::string& path)
{
    auto out = open_out(path);
    write_row(out, {"omega", "phase", "p", "p_se", "p_u", "scaled_p", "scaled_p_se"});
    for (const auto& r : rows) {
        write_row(out, {format_double(r.omega), format_double(r.phase), format_double(r.report.p),
                        format_double(r.report.p_se), format_double(r.report.p_u), format_double(r.report.scaled_p),
                        format_double(r.report.scaled_p_se)});
    }
    finish(out, path);
}

void emit_summary(const nlohmann::json& summary, const std::string& path)
{
    auto out = open_out(path);
    out << summary.dump(2) << '\n';
    finish(out, path);
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("'" + path + "' is empty");
    }
    std::istringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) {
        table.header.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::istringstream rs(line);
        for (std::string cell; std::getline(rs, cell, ',');) {
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
                throw std::runtime_error("'" + path + "': bad number '" + cell + "'");
            }
            row.push_back(v);
        }
        if (row.size() != table.header.size()) {
            throw std::runtime_error("'" + path + "': row width differs from header");
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

nlohmann::json read_summary(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    return nlohmann::json::parse(in);
}

nlohmann::json to_json(const PurityReport& r)
{
    return {{"p", r.p},
            {"p_se", r.p_se},
            {"p_u", r.p_u},
            {"scaled_p", r.scaled_p},
            {"scaled_p_se", r.scaled_p_se},
            {"scaled", r.scaled},
            {"t_burn", r.t_burn},
            {"t_end", r.t_end},
            {"n_trajectories", r.n_trajectories}};
}

}  // namespace realtraj
