#include "freenoise/cli.hpp"

int main(int argc, char** argv) { return freenoise::cli::run(argc, argv); }
