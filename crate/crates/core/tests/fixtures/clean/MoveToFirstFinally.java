package org.example.notes;

import android.database.Cursor;
import android.database.sqlite.SQLiteDatabase;

public class MoveToFirstFinally {
    private SQLiteDatabase db;

    public String firstTitle() {
        Cursor c = db.query("notes", null, null, null, null, null, null);
        try {
            if (c.moveToFirst()) use(c);
        } finally {
            c.close();
        }
        return null;
    }
}
