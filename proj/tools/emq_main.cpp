#include "cli.hpp"

int main(int argc, char** argv) { return emq::cli::run(argc, argv); }
