#include "egobridge/cli.hpp"

int main(int argc, char** argv) { return egobridge::cli::run(argc, argv); }
