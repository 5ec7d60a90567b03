#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/errors.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// CIFAR-10 binary batch format.
//
// A file is a sequence of 3073-byte records with no header:
//   byte 0:       label
//   bytes 1-3072: pixels, planar R then G then B, each 1024 bytes row-major
// Pixels map to float as byte/255.
// ---------------------------------------------------------------------------

inline constexpr int kCifarRecordBytes = 3073;
inline constexpr int kCifarSide = 32;
inline constexpr int kCifarChannels = 3;

inline Dataset load_cifar_binary(const std::string& path, int num_classes) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open " + path);
    const std::streamoff file_size = in.tellg();
    if (file_size % kCifarRecordBytes != 0) {
        const std::streamoff offset = file_size - file_size % kCifarRecordBytes;
        throw FormatError(path + ": truncated record at byte offset " + std::to_string(offset) +
                          " (file size " + std::to_string(file_size) +
                          " is not a multiple of 3073)");
    }
    in.seekg(0);

    Dataset dataset;
    dataset.num_classes = num_classes;
    dataset.name = path;
    const std::size_t records = static_cast<std::size_t>(file_size / kCifarRecordBytes);
    dataset.samples.reserve(records);

    std::vector<unsigned char> record(kCifarRecordBytes);
    for (std::size_t r = 0; r < records; ++r) {
        in.read(reinterpret_cast<char*>(record.data()), kCifarRecordBytes);
        if (!in) throw FormatError(path + ": short read at record " + std::to_string(r));
        const int label = record[0];
        if (label >= num_classes) {
            throw FormatError(path + ": record " + std::to_string(r) + ": label byte " +
                              std::to_string(label) + " >= num_classes " +
                              std::to_string(num_classes));
        }
        Sample s;
        s.image = Image(kCifarChannels, kCifarSide, kCifarSide);
        for (std::size_t i = 0; i < s.image.size(); ++i) {
            s.image.pixels[i] = from_byte(record[1 + i]);
        }
        s.label = one_hot(label, num_classes);
        dataset.samples.push_back(std::move(s));
    }
    return dataset;
}

// Writes any dataset of 3x32x32 images in the same record layout. Labels are
// stored as the argmax class, pixels as round(v*255).
inline void write_cifar_binary(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const Sample& s : dataset.samples) {
        if (s.image.channels != kCifarChannels || s.image.height != kCifarSide ||
            s.image.width != kCifarSide) {
            throw FormatError("write_cifar_binary: images must be 3x32x32");
        }
        out.put(static_cast<char>(s.label.argmax()));
        for (float v : s.image.pixels) out.put(static_cast<char>(to_byte(v)));
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace auglab
