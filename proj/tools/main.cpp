#include "cli.hpp"

int main(int argc, char** argv) { return dmarch::cli::run(argc, argv); }
