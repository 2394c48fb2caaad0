// Writes the bundled toolpath fixtures into a directory.

#include "amfuse/toolpath.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace amfuse::toolpath;

int main(int argc, char** argv)
{
    const std::filesystem::path dir = argc > 1 ? argv[1] : "fixtures";
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "one_segment.csv");
        out << "layer,seg_type,x_mm,y_mm,z_mm,speed_mm_s,tilt_deg\n"
               "0,infill,0,0,0,30,0\n"
               "0,infill,30,0,0,30,0\n";
    }

    RasterBuildSpec square;
    square.layers = 3;
    write_toolpath(dir / "square_raster_3layer.csv", make_raster_build(square));

    // One layer whose tool height wobbles by 0.1 mm over the middle lines.
    RasterBuildSpec flat;
    flat.layers = 1;
    auto segs = make_raster_build(flat).segments();
    const std::size_t a = segs.size() / 3, b = 2 * segs.size() / 3;
    for (std::size_t i = a; i < b; ++i) {
        segs[i].end.z += 0.1;
        segs[i + 1].start.z += 0.1;
    }
    write_toolpath(dir / "square_raster_jitter.csv", Toolpath(segs));

    RasterBuildSpec twisted;
    twisted.layers = 10;
    twisted.twist_deg = 4.0;
    twisted.contour = true;
    write_toolpath(dir / "twisted_raster_10layer.csv", make_raster_build(twisted));

    std::cout << "fixtures written to " << dir.string() << '\n';
    return 0;
}
