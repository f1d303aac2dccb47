#include "alioth/cli.hpp"

int main(int argc, char** argv) { return alioth::cli::run(argc, argv); }
