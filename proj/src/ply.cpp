#include "amfuse/error.hpp"
#include "amfuse/meshing.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace amfuse::mesh {

void write_ply(const std::filesystem::path& path, const TriangleMesh& m)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write mesh file: " + path.string());
    write_ply(out, m);
    if (!out)
        throw IoError("failed writing mesh file: " + path.string());
}

void write_ply(std::ostream& out, const TriangleMesh& m)
{
    m.validate();
    const bool has_scalar = !m.scalar.empty();
    const bool has_color = !m.colors.empty();
    out << "ply\nformat ascii 1.0\ncomment units mm\n";
    out << "element vertex " << m.vertices.size() << '\n';
    out << "property float x\nproperty float y\nproperty float z\n";
    if (has_scalar)
        out << "property float scalar_deviation\n";
    if (has_color)
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "element face " << m.triangles.size() << '\n';
    out << "property list uchar int vertex_indices\nend_header\n";
    char buf[160];
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        const Point3& p = m.vertices[i];
        int n = std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f", p.x, p.y, p.z);
        out.write(buf, n);
        if (has_scalar) {
            n = std::snprintf(buf, sizeof buf, " %.6f", m.scalar[i]);
            out.write(buf, n);
        }
        if (has_color)
            out << ' ' << int(m.colors[i][0]) << ' ' << int(m.colors[i][1]) << ' ' << int(m.colors[i][2]);
        out << '\n';
    }
    for (const Triangle& t : m.triangles)
        out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

TriangleMesh read_ply(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open mesh file: " + path.string());
    return read_ply(in, path.string());
}

TriangleMesh read_ply(std::istream& in, const std::string& source_name)
{
    auto fail = [&](const std::string& what) { return ParseError(source_name + ": " + what); };
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
        throw fail("not a PLY file");

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> props; // "list" entries recorded as "list:<name>"
    };
    std::vector<Element> elements;
    bool ascii = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (word == "element") {
            Element e;
            ls >> e.name >> e.count;
            if (!ls)
                throw fail("bad element line");
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty())
                throw fail("property before element");
            std::string type, name;
            ls >> type;
            if (type == "list") {
                std::string ct, it;
                ls >> ct >> it >> name;
                elements.back().props.push_back("list:" + name);
            } else {
                ls >> name;
                elements.back().props.push_back(name);
            }
        } else if (word == "end_header") {
            break;
        }
    }
    if (!ascii)
        throw fail("only ASCII PLY is supported");

    TriangleMesh m;
    bool mid_line = false; // token reads leave the rest of the last row unread
    for (const Element& e : elements) {
        if (e.name == "vertex") {
            mid_line = true;
            int ix = -1, iy = -1, iz = -1, is = -1, ir = -1, ig = -1, ib = -1;
            for (int k = 0; k < static_cast<int>(e.props.size()); ++k) {
                const std::string& p = e.props[static_cast<std::size_t>(k)];
                if (p == "x") ix = k;
                else if (p == "y") iy = k;
                else if (p == "z") iz = k;
                else if (p == "scalar_deviation") is = k;
                else if (p == "red") ir = k;
                else if (p == "green") ig = k;
                else if (p == "blue") ib = k;
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw fail("vertex element lacks x/y/z");
            std::vector<double> vals(e.props.size());
            for (std::size_t i = 0; i < e.count; ++i) {
                for (double& v : vals)
                    if (!(in >> v))
                        throw fail("truncated vertex data");
                m.vertices.push_back({vals[static_cast<std::size_t>(ix)], vals[static_cast<std::size_t>(iy)],
                                      vals[static_cast<std::size_t>(iz)]});
                if (is >= 0)
                    m.scalar.push_back(vals[static_cast<std::size_t>(is)]);
                if (ir >= 0 && ig >= 0 && ib >= 0)
                    m.colors.push_back({static_cast<std::uint8_t>(vals[static_cast<std::size_t>(ir)]),
                                        static_cast<std::uint8_t>(vals[static_cast<std::size_t>(ig)]),
                                        static_cast<std::uint8_t>(vals[static_cast<std::size_t>(ib)])});
            }
        } else if (e.name == "face") {
            mid_line = true;
            for (std::size_t i = 0; i < e.count; ++i) {
                for (const std::string& p : e.props) {
                    if (p.rfind("list:", 0) == 0) {
                        std::size_t n = 0;
                        if (!(in >> n))
                            throw fail("truncated face data");
                        std::vector<std::uint32_t> idx(n);
                        for (auto& v : idx)
                            if (!(in >> v))
                                throw fail("truncated face data");
                        if (p == "list:vertex_indices" || p == "list:vertex_index")
                            for (std::size_t k = 1; k + 1 < n; ++k) // fan-triangulate polygons
                                m.triangles.push_back({idx[0], idx[k], idx[k + 1]});
                    } else {
                        double skip;
                        if (!(in >> skip))
                            throw fail("truncated face data");
                    }
                }
            }
        } else {
            // unknown element: skip its rows
            if (mid_line)
                std::getline(in, line);
            mid_line = false;
            for (std::size_t i = 0; i < e.count; ++i)
                std::getline(in, line);
        }
    }
    try {
        m.validate();
    } catch (const std::invalid_argument& ex) {
        throw fail(ex.what());
    }
    return m;
}

}  // namespace amfuse::mesh
