#include "cli.hpp"

int main(int argc, char** argv) { return resokam::cli::run(argc, argv); }
