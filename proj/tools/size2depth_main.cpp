#include "size2depth/cli.hpp"

int main(int argc, char** argv) { return size2depth::cli::run(argc, argv); }
