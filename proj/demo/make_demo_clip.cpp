// Writes a procedural humanoid clip as BVH, handy for trying the CLI without
// mocap data:  make_demo_clip walk.bvh 300 7
#include "synthetic.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_demo_clip OUT.bvh [frames=300] [seed=1] [--no-fingers]\n";
        return 2;
    }
    const int frames = argc > 2 ? std::atoi(argv[2]) : 300;
    const unsigned seed = argc > 3 ? static_cast<unsigned>(std::atoi(argv[3])) : 1u;
    const bool fingers = !(argc > 4 && std::string(argv[4]) == "--no-fingers");
    if (frames < 2) {
        std::cerr << "frames must be >= 2\n";
        return 2;
    }
    const auto skel = genmm::fixtures::make_humanoid(fingers);
    const auto motion = genmm::fixtures::make_motion(skel, frames, seed);
    std::ofstream out(argv[1], std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << argv[1] << '\n';
        return 5;
    }
    out << genmm::write_bvh(skel, motion);
    return 0;
}
