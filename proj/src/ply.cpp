#include "sfm/ply.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sfm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "PLY writer assumes a little-endian host");

namespace sfm {

void write_ply(const std::vector<Eigen::Vector3d>& points, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << "ply\n"
        << "format binary_little_endian 1.0\n"
        << "element vertex " << points.size() << "\n"
        << "property double x\n"
        << "property double y\n"
        << "property double z\n"
        << "end_header\n";
    for (const auto& p : points) {
        double xyz[3] = {p[0], p[1], p[2]};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
}

std::vector<Eigen::Vector3d> read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);

    std::string line;
    std::getline(in, line);
    if (line != "ply") throw ParseError(path + ": not a PLY file");

    std::size_t n_vertices = 0;
    bool binary_le = false;
    std::vector<char> property_sizes;  // bytes per scalar property, in order
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            ls >> word;
            binary_le = word == "binary_little_endian";
        } else if (word == "element") {
            ls >> word >> n_vertices;
            if (word != "vertex") throw ParseError(path + ": unsupported element " + word);
        } else if (word == "property") {
            ls >> word;
            if (word == "double") property_sizes.push_back(8);
            else if (word == "float") property_sizes.push_back(4);
            else throw ParseError(path + ": unsupported property type " + word);
        }
    }
    if (!binary_le) throw ParseError(path + ": only binary_little_endian is supported");
    if (property_sizes.size() < 3) throw ParseError(path + ": fewer than 3 vertex properties");

    std::vector<Eigen::Vector3d> points(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        for (std::size_t p = 0; p < property_sizes.size(); ++p) {
            char buf[8];
            in.read(buf, property_sizes[p]);
            if (!in) throw ParseError(path + ": truncated vertex data");
            if (p >= 3) continue;
            if (property_sizes[p] == 8) {
                double v;
                std::memcpy(&v, buf, 8);
                points[i][p] = v;
            } else {
                float v;
                std::memcpy(&v, buf, 4);
                points[i][p] = v;
            }
        }
    }
    return points;
}

}  // namespace sfm
