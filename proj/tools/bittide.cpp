#include "bittide/cli.hpp"

int main(int argc, char** argv) { return bittide::cli::run(argc, argv); }
