#include "attnq/cli.hpp"

int main(int argc, char** argv) {
    return attnq::cli::run(argc, argv);
}
