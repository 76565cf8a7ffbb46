package org.example.reader;

import java.io.File;
import java.io.FileOutputStream;
import java.io.FileReader;

public class LackingReferenceBare {
    void probe(File f) throws Exception {
        new FileReader(f); // LEAK: lacking_reference
    }

    void save(String path, byte[] data) throws Exception {
        new FileOutputStream(path).write(data); // LEAK: lacking_reference
    }
}
