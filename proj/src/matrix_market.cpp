#include "rpm/matrix_market.hpp"

#include "rpm/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace rpm {

namespace {

enum class Field { Real, Integer, Pattern };
enum class Symmetry { General, Symmetric, SkewSymmetric };

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool blank_or_comment(const std::string& line) {
    const auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string::npos || line[pos] == '%';
}

struct Header {
    MatrixMarketFormat format;
    Field field;
    Symmetry symmetry;
};

Header parse_header(const std::string& line) {
    std::istringstream in(line);
    std::string banner, object, format, field, symmetry;
    in >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") {
        throw ParseError("missing %%MatrixMarket banner", 1);
    }
    object = lower(object);
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    if (object != "matrix") {
        throw ParseError("unsupported object '" + object + "'", 1);
    }
    Header h{};
    if (format == "coordinate") {
        h.format = MatrixMarketFormat::Coordinate;
    } else if (format == "array") {
        h.format = MatrixMarketFormat::Array;
    } else {
        throw ParseError("unsupported format '" + format + "'", 1);
    }
    if (field == "real" || field == "double") {
        h.field = Field::Real;
    } else if (field == "integer") {
        h.field = Field::Integer;
    } else if (field == "pattern" && h.format == MatrixMarketFormat::Coordinate) {
        h.field = Field::Pattern;
    } else {
        throw ParseError("unsupported field type '" + field + "' (only real-valued matrices)", 1);
    }
    if (symmetry == "general") {
        h.symmetry = Symmetry::General;
    } else if (symmetry == "symmetric") {
        h.symmetry = Symmetry::Symmetric;
    } else if (symmetry == "skew-symmetric") {
        h.symmetry = Symmetry::SkewSymmetric;
    } else {
        throw ParseError("unsupported symmetry '" + symmetry + "'", 1);
    }
    return h;
}

// Reads the next non-comment line; returns false at end of input.
bool next_data_line(std::istream& in, std::string& line, std::size_t& line_no) {
    while (std::getline(in, line)) {
        ++line_no;
        if (!blank_or_comment(line)) {
            return true;
        }
    }
    return false;
}

void place(Matrix& a, Index i, Index j, double v, Symmetry sym, std::size_t line_no) {
    if (i < 0 || j < 0 || i >= a.rows() || j >= a.cols()) {
        throw ParseError("entry index out of range", line_no);
    }
    a(i, j) = v;
    if (i != j) {
        if (sym == Symmetry::Symmetric) {
            a(j, i) = v;
        } else if (sym == Symmetry::SkewSymmetric) {
            a(j, i) = -v;
        }
    }
}

} // namespace

Matrix read_matrix_market(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError("empty input", 1);
    }
    ++line_no;
    const Header h = parse_header(line);

    if (!next_data_line(in, line, line_no)) {
        throw ParseError("missing size line", line_no + 1);
    }
    std::istringstream size_line(line);
    long long rows = 0, cols = 0, entries = 0;
    size_line >> rows >> cols;
    if (h.format == MatrixMarketFormat::Coordinate) {
        size_line >> entries;
    }
    if (!size_line || rows < 1 || cols < 1 || entries < 0) {
        throw ParseError("malformed size line", line_no);
    }
    if (h.symmetry != Symmetry::General && rows != cols) {
        throw ParseError("symmetric storage requires a square matrix", line_no);
    }

    Matrix a = Matrix::Zero(rows, cols);
    if (h.format == MatrixMarketFormat::Coordinate) {
        for (long long e = 0; e < entries; ++e) {
            if (!next_data_line(in, line, line_no)) {
                throw ParseError("expected " + std::to_string(entries) + " entries, found " +
                                     std::to_string(e),
                                 line_no + 1);
            }
            std::istringstream entry(line);
            long long i = 0, j = 0;
            double v = 1.0;
            entry >> i >> j;
            if (h.field != Field::Pattern) {
                entry >> v;
            }
            if (!entry) {
                throw ParseError("malformed entry", line_no);
            }
            place(a, static_cast<Index>(i - 1), static_cast<Index>(j - 1), v, h.symmetry, line_no);
        }
    } else {
        // Column-major; symmetric storage lists the lower triangle only.
        for (Index j = 0; j < cols; ++j) {
            const Index start = h.symmetry == Symmetry::General          ? 0
                                : h.symmetry == Symmetry::SkewSymmetric ? j + 1
                                                                        : j;
            for (Index i = start; i < rows; ++i) {
                if (!next_data_line(in, line, line_no)) {
                    throw ParseError("array data ended early", line_no + 1);
                }
                std::istringstream entry(line);
                double v = 0.0;
                entry >> v;
                if (!entry) {
                    throw ParseError("malformed value", line_no);
                }
                place(a, i, j, v, h.symmetry, line_no);
            }
        }
    }
    return a;
}

Matrix load_matrix_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const Matrix& a, MatrixMarketFormat format) {
    char buf[96];
    if (format == MatrixMarketFormat::Array) {
        out << "%%MatrixMarket matrix array real general\n";
        out << a.rows() << ' ' << a.cols() << '\n';
        for (Index j = 0; j < a.cols(); ++j) {
            for (Index i = 0; i < a.rows(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g\n", a(i, j));
                out << buf;
            }
        }
        return;
    }
    const auto nnz = (a.array() != 0.0).count();
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.rows() << ' ' << a.cols() << ' ' << nnz << '\n';
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            if (a(i, j) != 0.0) {
                std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n", static_cast<long long>(i + 1),
                              static_cast<long long>(j + 1), a(i, j));
                out << buf;
            }
        }
    }
}

void write_matrix_market(const std::filesystem::path& path, const Matrix& a,
                         MatrixMarketFormat format) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    write_matrix_market(out, a, format);
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace rpm
