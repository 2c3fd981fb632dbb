// Regenerates tests/data/golden_trace_default.bin from the default micro model.
#include "agcam/adapter/trace_io.hpp"
#include "agcam/micro/micro_model.hpp"

#include <iostream>

int main(int argc, char **argv) {
    if (argc != 2) {
        std::cerr << "usage: make_golden_trace OUT.bin\n";
        return 2;
    }
    auto model = agcam::micro::build_micro_model({});
    agcam::Image image(8, 8, 3);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            for (int c = 0; c < 3; ++c) image.at(x, y, c) = static_cast<std::uint8_t>((x * 31 + y * 17 + c * 59) % 256);
        }
    }
    const auto inputs = model->encode_inputs(image, "What is the speed?");
    agcam::save_trace(argv[1], model->forward_backward_capture(inputs, agcam::NormMode::kSoftmax));
    std::cout << "wrote " << argv[1] << " checksum " << model->weight_checksum() << "\n";
    return 0;
}
