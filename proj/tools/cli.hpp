#pragma once

namespace emq::cli {

int run(int argc, char** argv);

}  // namespace emq::cli
