#include "vivid/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vivid::io {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& os, double v) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("read_u32: unexpected end of file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("read_f64: unexpected end of file");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

void write_magic(std::ostream& os, const char magic[4]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        throw std::runtime_error(what + ": bad magic");
}

void save_field(const std::string& path, const StateField& field) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_field: cannot open " + path);
    write_magic(os, "FLD1");
    write_u32(os, static_cast<std::uint32_t>(field.rows()));
    write_u32(os, static_cast<std::uint32_t>(field.cols()));
    for (int i = 0; i < field.rows(); ++i)
        for (int j = 0; j < field.cols(); ++j) write_f64(os, field(i, j));
    if (!os) throw std::runtime_error("save_field: write failed for " + path);
}

StateField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_field: cannot open " + path);
    expect_magic(is, "FLD1", "load_field");
    const int rows = static_cast<int>(read_u32(is));
    const int cols = static_cast<int>(read_u32(is));
    Eigen::MatrixXd v(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) v(i, j) = read_f64(is);
    return StateField(std::move(v));
}

void save_pod(const std::string& path, const PodBasis& basis) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_pod: cannot open " + path);
    write_magic(os, "PODB");
    write_u32(os, 1u);
    write_u32(os, static_cast<std::uint32_t>(basis.modes.rows()));
    write_u32(os, static_cast<std::uint32_t>(basis.q));
    write_u32(os, static_cast<std::uint32_t>(basis.n_state));
    write_u32(os, static_cast<std::uint32_t>(basis.singular_values.size()));
    for (int c = 0; c < basis.q; ++c)
        for (Eigen::Index r = 0; r < basis.modes.rows(); ++r)
            write_f64(os, basis.modes(r, c));
    for (Eigen::Index i = 0; i < basis.singular_values.size(); ++i)
        write_f64(os, basis.singular_values[i]);
    if (!os) throw std::runtime_error("save_pod: write failed for " + path);
}

PodBasis load_pod(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_pod: cannot open " + path);
    expect_magic(is, "PODB", "load_pod");
    const std::uint32_t version = read_u32(is);
    if (version != 1u) throw std::runtime_error("load_pod: unsupported version");
    PodBasis basis;
    const int dim = static_cast<int>(read_u32(is));
    basis.q = static_cast<int>(read_u32(is));
    basis.n_state = static_cast<int>(read_u32(is));
    const int n_sv = static_cast<int>(read_u32(is));
    basis.modes.resize(dim, basis.q);
    for (int c = 0; c < basis.q; ++c)
        for (int r = 0; r < dim; ++r) basis.modes(r, c) = read_f64(is);
    basis.singular_values.resize(n_sv);
    for (int i = 0; i < n_sv; ++i) basis.singular_values[i] = read_f64(is);
    return basis;
}

std::string format_double(double v) {
    char buf[40];
    // Shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void save_sensors_csv(const std::string& path, const SensorSet& sensors) {
    CsvWriter w(path);
    w.write_row({"k", "i", "j", "value"});
    for (int k = 0; k < sensors.count(); ++k) {
        const auto [i, j] = sensors.positions[static_cast<std::size_t>(k)];
        w.write_row({std::to_string(k), std::to_string(i), std::to_string(j),
                     format_double(sensors.values[k])});
    }
}

SensorSet load_sensors_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_sensors_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("load_sensors_csv: empty file");
    SensorSet s;
    std::vector<double> values;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string tok;
        std::vector<std::string> cells;
        while (std::getline(row, tok, ',')) cells.push_back(tok);
        if (cells.size() != 4) throw std::runtime_error("load_sensors_csv: malformed row");
        s.positions.emplace_back(std::stoi(cells[1]), std::stoi(cells[2]));
        values.push_back(std::stod(cells[3]));
    }
    s.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return s;
}

struct CsvWriter::Impl {
    std::ofstream os;
};

CsvWriter::CsvWriter(const std::string& path) : impl_(new Impl) {
    impl_->os.open(path, std::ios::binary);  // fixed \r\n line endings
    if (!impl_->os) {
        delete impl_;
        throw std::runtime_error("CsvWriter: cannot open " + path);
    }
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::write_row(const std::vector<std::string>& fields) {
    bool first = true;
    for (const std::string& f : fields) {
        if (!first) impl_->os << ',';
        first = false;
        const bool quote = f.find_first_of(",\"\r\n") != std::string::npos;
        if (quote) {
            impl_->os << '"';
            for (char c : f) {
                if (c == '"') impl_->os << '"';
                impl_->os << c;
            }
            impl_->os << '"';
        } else {
            impl_->os << f;
        }
    }
    impl_->os << "\r\n";
}

}  // namespace vivid::io
