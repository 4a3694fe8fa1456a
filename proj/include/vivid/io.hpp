#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vivid/field.hpp"
#include "vivid/observation.hpp"
#include "vivid/pod.hpp"

namespace vivid::io {

// Little-endian binary primitives shared by all file formats.
void write_u32(std::ostream& os, std::uint32_t v);
void write_f64(std::ostream& os, double v);
std::uint32_t read_u32(std::istream& is);
double read_f64(std::istream& is);
void write_magic(std::ostream& os, const char magic[4]);
void expect_magic(std::istream& is, const char magic[4], const std::string& what);

/// Field binary format: magic "FLD1", u32 rows, u32 cols, then rows*cols
/// f64 values in row-major order.
void save_field(const std::string& path, const StateField& field);
StateField load_field(const std::string& path);

/// POD basis container: magic "PODB", u32 version, u32 state dim, u32 q,
/// u32 snapshot count, u32 singular-value count, modes written column by
/// column, then the singular values.
void save_pod(const std::string& path, const PodBasis& basis);
PodBasis load_pod(const std::string& path);

/// Sensor sets as CSV rows (k, i, j, value) with a header line.
void save_sensors_csv(const std::string& path, const SensorSet& sensors);
SensorSet load_sensors_csv(const std::string& path);

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

/// Minimal RFC-4180 writer; fields are quoted only when needed.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void write_row(const std::vector<std::string>& fields);

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace vivid::io
