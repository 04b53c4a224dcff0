#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace mlg {

std::string fmt17(double v);

class CsvWriter {
public:
    using Cell = std::variant<double, long long, std::string>;

    CsvWriter(const std::string &path, const std::vector<std::string> &header);
    void row(const std::vector<Cell> &cells);
    void comment(const std::string &line);
    const std::string &path() const { return path_; }

private:
    std::string path_;
    std::ofstream os_;
    std::size_t width_;
};

struct PlotSeries {
    int column;
    std::string title;
};

// a gnuplot script that plots the given columns of a CSV file
void write_gnuplot_stub(const std::string &path, const std::string &csv_name, int x_column,
                        const std::vector<PlotSeries> &series, const std::string &xlabel, const std::string &ylabel,
                        bool logscale = false);

}  // namespace mlg
