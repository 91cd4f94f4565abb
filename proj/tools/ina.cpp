#include "ina/cli.hpp"

int main(int argc, char** argv) { return ina::cli::run(argc, argv); }
