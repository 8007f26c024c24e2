#include "mocap/cli.hpp"

int main(int argc, char** argv) { return mocap::cli::run(argc, argv); }
