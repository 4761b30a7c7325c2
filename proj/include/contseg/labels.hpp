#ifndef CONTSEG_LABELS_HPP
#define CONTSEG_LABELS_HPP

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <contseg/types.hpp>

namespace contseg
{

/// One record of a label table: ground truth instance or predicted cluster id of a point (0 = none).
struct LabelRecord
{
    uint64_t point_id{0};
    uint32_t label{0};

    friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

// Binary label table, little endian, 12 bytes per record: u64 point_id, u32 label.
inline void write_labels(std::ostream& out, const std::vector<LabelRecord>& records)
{
    for (const LabelRecord& r : records)
    {
        out.write(reinterpret_cast<const char*>(&r.point_id), sizeof(r.point_id));
        out.write(reinterpret_cast<const char*>(&r.label), sizeof(r.label));
    }
    if (!out)
        throw DataError("failed writing label table");
}

inline std::vector<LabelRecord> read_labels(std::istream& in)
{
    std::vector<LabelRecord> records;
    while (true)
    {
        LabelRecord r;
        in.read(reinterpret_cast<char*>(&r.point_id), sizeof(r.point_id));
        if (in.gcount() == 0)
            break;
        if (in.gcount() != sizeof(r.point_id))
            throw DataError("truncated label record");
        in.read(reinterpret_cast<char*>(&r.label), sizeof(r.label));
        if (in.gcount() != sizeof(r.label))
            throw DataError("truncated label record");
        records.push_back(r);
    }
    return records;
}

inline void save_labels(const std::string& path, const std::vector<LabelRecord>& records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open '" + path + "' for writing");
    write_labels(out, records);
}

inline std::vector<LabelRecord> load_labels(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open label table '" + path + "'");
    return read_labels(in);
}

} // namespace contseg

#endif
