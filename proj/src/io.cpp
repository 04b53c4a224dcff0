#include "maglorentz/io.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mlg {

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string &path, const std::vector<std::string> &header)
    : path_(path), os_(path), width_(header.size()) {
    if (!os_) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
}

void CsvWriter::row(const std::vector<Cell> &cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width mismatch in " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os_ << ',';
        const auto &c = cells[i];
        if (auto d = std::get_if<double>(&c)) os_ << fmt17(*d);
        else if (auto n = std::get_if<long long>(&c)) os_ << *n;
        else os_ << std::get<std::string>(c);
    }
    os_ << '\n';
}

void CsvWriter::comment(const std::string &line) { os_ << "# " << line << '\n'; }

void write_gnuplot_stub(const std::string &path, const std::string &csv_name, int x_column,
                        const std::vector<PlotSeries> &series, const std::string &xlabel, const std::string &ylabel,
                        bool logscale) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "set datafile separator ','\n";
    os << "set key autotitle columnhead\n";
    os << "set xlabel '" << xlabel << "'\n";
    os << "set ylabel '" << ylabel << "'\n";
    if (logscale) os << "set logscale xy\n";
    os << "plot ";
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (i) os << ", \\\n     ";
        os << "'" << csv_name << "' using " << x_column << ":" << series[i].column << " with linespoints title '"
           << series[i].title << "'";
    }
    os << "\n";
}

}  // namespace mlg
